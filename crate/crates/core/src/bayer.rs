//! Bayer colour filter array addressing.
//!
//! `G1` is the green site sharing a row with red, `G2` the green site sharing
//! a row with blue. With that convention the channel of a pixel is invariant
//! under any crop, as long as the pattern code is re-derived from the crop
//! origin's parity.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// One of the four mosaic sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    R,
    G1,
    G2,
    B,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::R, Channel::G1, Channel::G2, Channel::B];

    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G1 => 1,
            Channel::G2 => 2,
            Channel::B => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::R => "R",
            Channel::G1 => "G1",
            Channel::G2 => "G2",
            Channel::B => "B",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "R" => Ok(Channel::R),
            "G1" => Ok(Channel::G1),
            "G2" => Ok(Channel::G2),
            "B" => Ok(Channel::B),
            other => Err(Error::InvalidParameter(format!("unknown channel '{other}'"))),
        }
    }
}

/// 2x2 mosaic phase, named by the top-left quad read row by row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BayerPattern {
    Rggb,
    Grbg,
    Gbrg,
    Bggr,
}

impl BayerPattern {
    pub const ALL: [BayerPattern; 4] = [
        BayerPattern::Rggb,
        BayerPattern::Grbg,
        BayerPattern::Gbrg,
        BayerPattern::Bggr,
    ];

    /// Channels of the 2x2 quad, indexed `[y & 1][x & 1]`.
    const fn quad(self) -> [[Channel; 2]; 2] {
        use Channel::*;
        match self {
            BayerPattern::Rggb => [[R, G1], [G2, B]],
            BayerPattern::Grbg => [[G1, R], [B, G2]],
            BayerPattern::Gbrg => [[G2, B], [R, G1]],
            BayerPattern::Bggr => [[B, G2], [G1, R]],
        }
    }

    #[inline]
    pub fn channel_of(self, x: u32, y: u32) -> Channel {
        self.quad()[(y & 1) as usize][(x & 1) as usize]
    }

    /// Pattern seen by a window whose origin sits at `(dx, dy)` in this one.
    pub fn shifted(self, dx: u32, dy: u32) -> BayerPattern {
        let want = [
            [self.channel_of(dx, dy), self.channel_of(dx + 1, dy)],
            [self.channel_of(dx, dy + 1), self.channel_of(dx + 1, dy + 1)],
        ];
        BayerPattern::ALL
            .into_iter()
            .find(|p| p.quad() == want)
            .expect("every shift of a Bayer quad is a Bayer quad")
    }

    /// Wire code used by the raw and calibration containers.
    pub fn code(self) -> u8 {
        match self {
            BayerPattern::Rggb => 0,
            BayerPattern::Grbg => 1,
            BayerPattern::Gbrg => 2,
            BayerPattern::Bggr => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<BayerPattern> {
        BayerPattern::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BayerPattern::Rggb => "RGGB",
            BayerPattern::Grbg => "GRBG",
            BayerPattern::Gbrg => "GBRG",
            BayerPattern::Bggr => "BGGR",
        }
    }
}

impl fmt::Display for BayerPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BayerPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        BayerPattern::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Bayer pattern '{s}'")))
    }
}
