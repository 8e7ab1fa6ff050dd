//! Least-information-loss conversion to 8 bits per channel.
//!
//! Unoccupied intensity levels are dropped first; the remaining occupied
//! levels are ranked and the ranks are stretched linearly over 0..=255.
//! Levels are collected either per colour channel or jointly, and either
//! per image or over a whole series so that one level maps to the same code
//! in every frame.

use std::fmt;
use std::str::FromStr;

use crate::bayer::{BayerPattern, Channel};
use crate::error::{Error, Result};
use crate::image::{crop_slice, CropRect, Gray16, PngImage, RawImage};
use crate::par;

/// How samples of an image are arranged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Gray,
    /// Interleaved R, G, B.
    Rgb,
    /// One sample per pixel behind a colour filter array.
    Mosaic(BayerPattern),
}

impl Layout {
    pub fn channels(self) -> usize {
        match self {
            Layout::Rgb => 3,
            Layout::Gray | Layout::Mosaic(_) => 1,
        }
    }

    fn same_kind(self, other: Layout) -> bool {
        matches!(
            (self, other),
            (Layout::Gray, Layout::Gray) | (Layout::Rgb, Layout::Rgb) | (Layout::Mosaic(_), Layout::Mosaic(_))
        )
    }
}

/// Normalization grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupMode {
    /// One group per colour (R, G, B; both mosaic greens share a group).
    #[default]
    PerChannel,
    /// A single group over all channels.
    Joint,
}

impl FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-channel" | "per_channel" => Ok(GroupMode::PerChannel),
            "joint" => Ok(GroupMode::Joint),
            _ => Err(Error::InvalidParameter(format!("unknown LIL mode '{s}'"))),
        }
    }
}

impl fmt::Display for GroupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupMode::PerChannel => "per-channel",
            GroupMode::Joint => "joint",
        })
    }
}

/// Whether levels are shared across a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scope {
    #[default]
    Single,
    Series,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Scope::Single),
            "series" => Ok(Scope::Series),
            _ => Err(Error::InvalidParameter(format!("unknown LIL scope '{s}'"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Single => "single",
            Scope::Series => "series",
        })
    }
}

/// Integer image of more than 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntImage {
    pub width: u32,
    pub height: u32,
    pub layout: Layout,
    pub bit_depth: u8,
    pub data: Vec<u16>,
}

impl IntImage {
    pub fn new(width: u32, height: u32, layout: Layout, bit_depth: u8, data: Vec<u16>) -> Result<Self> {
        if !(1..=16).contains(&bit_depth) {
            return Err(Error::InvalidBitDepth(bit_depth));
        }
        if width == 0 || height == 0 || data.len() != width as usize * height as usize * layout.channels() {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height}x{} with {} samples",
                layout.channels(),
                data.len()
            )));
        }
        let max = (1u32 << bit_depth) - 1;
        if let Some((index, &v)) = data.iter().enumerate().find(|(_, &v)| u32::from(v) > max) {
            return Err(Error::SampleOutOfRange {
                index,
                value: u32::from(v),
                bit_depth,
            });
        }
        Ok(IntImage {
            width,
            height,
            layout,
            bit_depth,
            data,
        })
    }

    pub fn from_raw(raw: &RawImage) -> Self {
        IntImage {
            width: raw.width(),
            height: raw.height(),
            layout: Layout::Mosaic(raw.pattern()),
            bit_depth: raw.bit_depth(),
            data: raw.samples().to_vec(),
        }
    }

    /// Single-plane 16-bit image, optionally interpreted as a mosaic.
    pub fn from_gray16(img: &Gray16, bit_depth: u8, pattern: Option<BayerPattern>) -> Result<Self> {
        let layout = pattern.map_or(Layout::Gray, Layout::Mosaic);
        IntImage::new(img.width, img.height, layout, bit_depth, img.data.clone())
    }

    pub fn from_png(img: PngImage, pattern: Option<BayerPattern>) -> Result<Self> {
        let layout = match (img.channels, pattern) {
            (1, None) => Layout::Gray,
            (1, Some(p)) => Layout::Mosaic(p),
            (3, None) => Layout::Rgb,
            (3, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "a Bayer pattern applies to single-channel input only".into(),
                ))
            }
            (c, _) => return Err(Error::InvalidParameter(format!("{c} channels"))),
        };
        IntImage::new(img.width, img.height, layout, img.bit_depth, img.data)
    }

    pub fn crop(&self, rect: &CropRect) -> Result<IntImage> {
        rect.check(self.width, self.height)?;
        let layout = match self.layout {
            Layout::Mosaic(p) => Layout::Mosaic(p.shifted(rect.x0, rect.y0)),
            other => other,
        };
        Ok(IntImage {
            width: rect.w,
            height: rect.h,
            layout,
            bit_depth: self.bit_depth,
            data: crop_slice(&self.data, self.width, self.layout.channels(), rect),
        })
    }
}

/// 8-bit result of a conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image8 {
    pub width: u32,
    pub height: u32,
    pub layout: Layout,
    pub data: Vec<u8>,
}

impl Image8 {
    /// Splits a mosaic into quarter-resolution R, G1, G2, B planes.
    pub fn planes(&self) -> Result<[Gray8; 4]> {
        let Layout::Mosaic(pattern) = self.layout else {
            return Err(Error::InvalidParameter("only mosaic images split into planes".into()));
        };
        let (pw, ph) = (self.width / 2, self.height / 2);
        if pw == 0 || ph == 0 {
            return Err(Error::InvalidDimensions(format!(
                "{}x{} mosaic is too small to split",
                self.width, self.height
            )));
        }
        Ok(Channel::ALL.map(|ch| {
            // offset of this channel inside the 2x2 quad
            let (ox, oy) = [(0, 0), (1, 0), (0, 1), (1, 1)]
                .into_iter()
                .find(|&(x, y)| pattern.channel_of(x, y) == ch)
                .unwrap();
            let mut data = Vec::with_capacity((pw * ph) as usize);
            for y in 0..ph {
                for x in 0..pw {
                    data.push(self.data[((2 * y + oy) * self.width + 2 * x + ox) as usize]);
                }
            }
            Gray8 {
                width: pw,
                height: ph,
                data,
            }
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

fn group_count(layout: Layout, mode: GroupMode) -> usize {
    match (mode, layout) {
        (GroupMode::Joint, _) | (GroupMode::PerChannel, Layout::Gray) => 1,
        (GroupMode::PerChannel, Layout::Rgb | Layout::Mosaic(_)) => 3,
    }
}

fn mosaic_group(ch: Channel) -> usize {
    match ch {
        Channel::R => 0,
        Channel::G1 | Channel::G2 => 1,
        Channel::B => 2,
    }
}

/// Calls `f(group, samples_of_row_in_that_group...)` for every sample, row by row.
fn for_each_grouped(img: &IntImage, mode: GroupMode, mut f: impl FnMut(usize, usize)) {
    let w = img.width as usize;
    match (mode, img.layout) {
        (GroupMode::Joint, _) | (GroupMode::PerChannel, Layout::Gray) => {
            for i in 0..img.data.len() {
                f(0, i);
            }
        }
        (GroupMode::PerChannel, Layout::Rgb) => {
            for i in 0..img.data.len() {
                f(i % 3, i);
            }
        }
        (GroupMode::PerChannel, Layout::Mosaic(p)) => {
            for y in 0..img.height as usize {
                let even = mosaic_group(p.channel_of(0, y as u32));
                let odd = mosaic_group(p.channel_of(1, y as u32));
                for x in 0..w {
                    f(if x & 1 == 0 { even } else { odd }, y * w + x);
                }
            }
        }
    }
}

/// Sorted occupied levels of each normalization group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSet {
    pub mode: GroupMode,
    pub bit_depth: u8,
    pub groups: Vec<Vec<u16>>,
}

impl LevelSet {
    pub fn counts(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

fn occupancy(img: &IntImage, mode: GroupMode) -> Vec<Vec<bool>> {
    let levels = 1usize << img.bit_depth;
    let mut occ = vec![vec![false; levels]; group_count(img.layout, mode)];
    for_each_grouped(img, mode, |g, i| occ[g][img.data[i] as usize] = true);
    occ
}

fn check_series(images: &[IntImage]) -> Result<()> {
    let first = images.first().ok_or_else(|| Error::Empty("image set".into()))?;
    for img in images {
        if !img.layout.same_kind(first.layout) || img.bit_depth != first.bit_depth {
            return Err(Error::DimensionMismatch(format!(
                "series mixes {:?}/{}-bit with {:?}/{}-bit",
                first.layout, first.bit_depth, img.layout, img.bit_depth
            )));
        }
    }
    Ok(())
}

/// Union of occupied levels over `images`, per group.
pub fn collect_levels(images: &[IntImage], mode: GroupMode) -> Result<LevelSet> {
    check_series(images)?;
    let per_frame = par::map(images, |img| occupancy(img, mode));
    let mut acc = per_frame[0].clone();
    for occ in &per_frame[1..] {
        for (a, o) in acc.iter_mut().zip(occ) {
            for (x, &y) in a.iter_mut().zip(o) {
                *x |= y;
            }
        }
    }
    let groups = acc
        .iter()
        .map(|occ| {
            occ.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(v, _)| v as u16)
                .collect()
        })
        .collect();
    Ok(LevelSet {
        mode,
        bit_depth: images[0].bit_depth,
        groups,
    })
}

/// Occupied level -> 8-bit code, per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LilLut {
    pub mode: GroupMode,
    bit_depth: u8,
    /// Dense table per group; `None` marks an unoccupied level.
    codes: Vec<Vec<Option<u8>>>,
}

/// `round(255 * rank / (count - 1))`, rounding half up; 0 for a single level.
#[inline]
pub fn rank_code(rank: usize, count: usize) -> u8 {
    if count < 2 {
        return 0;
    }
    let d = (count - 1) as u64;
    ((2 * 255 * rank as u64 + d) / (2 * d)) as u8
}

pub fn build_lut(levels: &LevelSet) -> LilLut {
    let size = 1usize << levels.bit_depth;
    let codes = levels
        .groups
        .iter()
        .map(|occupied| {
            let mut table = vec![None; size];
            for (rank, &level) in occupied.iter().enumerate() {
                table[level as usize] = Some(rank_code(rank, occupied.len()));
            }
            table
        })
        .collect();
    LilLut {
        mode: levels.mode,
        bit_depth: levels.bit_depth,
        codes,
    }
}

impl LilLut {
    pub fn code(&self, group: usize, level: u16) -> Option<u8> {
        self.codes.get(group)?.get(level as usize).copied().flatten()
    }

    pub fn group_count(&self) -> usize {
        self.codes.len()
    }
}

pub fn apply_lut(lut: &LilLut, image: &IntImage) -> Result<Image8> {
    if group_count(image.layout, lut.mode) != lut.codes.len() || image.bit_depth > lut.bit_depth {
        return Err(Error::DimensionMismatch(format!(
            "lookup table ({} groups, {}-bit) does not fit {:?} {}-bit image",
            lut.codes.len(),
            lut.bit_depth,
            image.layout,
            image.bit_depth
        )));
    }
    let row_len = image.width as usize * image.layout.channels();
    let mut data = vec![0u8; image.data.len()];
    let mut missing: Vec<Option<(u16, usize)>> = vec![None; image.height as usize];
    {
        let mut rows: Vec<_> =
            data.chunks_mut(row_len).zip(missing.iter_mut()).collect();
        par::for_each_chunk_mut(&mut rows, 1, |y, job| {
            let (out, miss) = &mut job[0];
            let src = &image.data[y * row_len..(y + 1) * row_len];
            let groups: [usize; 3] = match (lut.mode, image.layout) {
                (GroupMode::Joint, _) | (GroupMode::PerChannel, Layout::Gray) => [0, 0, 0],
                (GroupMode::PerChannel, Layout::Rgb) => [0, 1, 2],
                (GroupMode::PerChannel, Layout::Mosaic(p)) => {
                    let g = [p.channel_of(0, y as u32), p.channel_of(1, y as u32)].map(mosaic_group);
                    [g[0], g[1], 0]
                }
            };
            let period = match image.layout {
                Layout::Rgb => 3,
                Layout::Mosaic(_) => 2,
                Layout::Gray => 1,
            };
            for (x, (d, &v)) in out.iter_mut().zip(src).enumerate() {
                let g = groups[x % period];
                match lut.codes[g][v as usize] {
                    Some(c) => *d = c,
                    None => {
                        **miss = Some((v, g));
                        return;
                    }
                }
            }
        });
    }
    if let Some((level, group)) = missing.into_iter().flatten().next() {
        return Err(Error::LevelNotInLut { level, group });
    }
    Ok(Image8 {
        width: image.width,
        height: image.height,
        layout: image.layout,
        data,
    })
}

/// Converted images plus the level sets they were mapped with.
#[derive(Debug, Clone, PartialEq)]
pub struct LilOutput {
    pub images: Vec<Image8>,
    /// One set for series scope, one per image for single scope.
    pub level_sets: Vec<LevelSet>,
}

/// Crop (optional), collect levels, build the table(s) and apply them.
pub fn lil_convert(images: &[IntImage], mode: GroupMode, scope: Scope, crop: Option<&CropRect>) -> Result<LilOutput> {
    let cropped;
    let images = match crop {
        Some(rect) => {
            cropped = images.iter().map(|img| img.crop(rect)).collect::<Result<Vec<_>>>()?;
            &cropped[..]
        }
        None => images,
    };
    check_series(images)?;
    match scope {
        Scope::Series => {
            let levels = collect_levels(images, mode)?;
            let lut = build_lut(&levels);
            let out = par::try_map(images, |img| apply_lut(&lut, img))?;
            Ok(LilOutput {
                images: out,
                level_sets: vec![levels],
            })
        }
        Scope::Single => {
            let pairs = par::try_map(images, |img| -> Result<(Image8, LevelSet)> {
                let levels = collect_levels(std::slice::from_ref(img), mode)?;
                Ok((apply_lut(&build_lut(&levels), img)?, levels))
            })?;
            let (images, level_sets) = pairs.into_iter().unzip();
            Ok(LilOutput { images, level_sets })
        }
    }
}

/// Occupied-level counts per group, one line per level set.
pub fn format_report(out: &LilOutput, names: &[String], mode: GroupMode, scope: Scope) -> String {
    let mut s = format!("# mode {mode} scope {scope}\n# name occupied_levels_per_group\n");
    for (i, set) in out.level_sets.iter().enumerate() {
        let name = match scope {
            Scope::Series => "series".to_string(),
            Scope::Single => names.get(i).cloned().unwrap_or_else(|| i.to_string()),
        };
        let counts: Vec<String> = set.counts().iter().map(usize::to_string).collect();
        s.push_str(&format!("{name} {}\n", counts.join(" ")));
    }
    s
}
