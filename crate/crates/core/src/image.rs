//! Raw mosaic frames, 16-bit PNG containers and cropping.
//!
//! The raw container ("NRAW") is a fixed little-endian layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NRAW"
//! 4       1     version (1)
//! 5       4     width  (u32)
//! 9       4     height (u32)
//! 13      1     bit depth (8..=16)
//! 14      1     Bayer code (0 RGGB, 1 GRBG, 2 GBRG, 3 BGGR)
//! 15      2*N   samples, row-major u16
//! ```

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::bayer::{BayerPattern, Channel};
use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"NRAW";
pub const RAW_VERSION: u8 = 1;
pub const RAW_HEADER_LEN: usize = 15;

/// Single-sample-per-pixel mosaic frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: u32,
    height: u32,
    bit_depth: u8,
    pattern: BayerPattern,
    samples: Vec<u16>,
}

impl RawImage {
    pub fn new(
        width: u32,
        height: u32,
        bit_depth: u8,
        pattern: BayerPattern,
        samples: Vec<u16>,
    ) -> Result<Self> {
        if !(8..=16).contains(&bit_depth) {
            return Err(Error::InvalidBitDepth(bit_depth));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("{width}x{height}")));
        }
        let expected = width as usize * height as usize;
        if samples.len() != expected {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} needs {expected} samples, got {}",
                samples.len()
            )));
        }
        let max = max_value(bit_depth);
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &v)| u32::from(v) > max) {
            return Err(Error::SampleOutOfRange {
                index,
                value: u32::from(value),
                bit_depth,
            });
        }
        Ok(RawImage {
            width,
            height,
            bit_depth,
            pattern,
            samples,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u16> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn channel_of(&self, x: u32, y: u32) -> Channel {
        self.pattern.channel_of(x, y)
    }

    /// Number of distinct sample values present.
    pub fn occupied_levels(&self) -> usize {
        count_occupied(&self.samples)
    }
}

/// Largest value representable at `bit_depth`.
pub fn max_value(bit_depth: u8) -> u32 {
    (1u32 << bit_depth) - 1
}

pub(crate) fn count_occupied(samples: &[u16]) -> usize {
    let mut seen = vec![false; 1 << 16];
    let mut n = 0;
    for &s in samples {
        let slot = &mut seen[s as usize];
        if !*slot {
            *slot = true;
            n += 1;
        }
    }
    n
}

/// Axis-aligned crop window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRect {
    pub fn new(x0: u32, y0: u32, w: u32, h: u32) -> Self {
        CropRect { x0, y0, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        CropRect::new(0, 0, width, height)
    }

    pub fn check(&self, width: u32, height: u32) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && u64::from(self.x0) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y0) + u64::from(self.h) <= u64::from(height);
        if fits {
            Ok(())
        } else {
            Err(Error::CropOutOfBounds {
                rect: self.to_string(),
                width,
                height,
            })
        }
    }
}

impl fmt::Display for CropRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.w, self.h)
    }
}

impl FromStr for CropRect {
    type Err = Error;

    /// Parses `x0,y0,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidParameter(format!("crop '{s}' must be x0,y0,w,h"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let mut v = [0u32; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        if v[2] == 0 || v[3] == 0 {
            return Err(bad());
        }
        Ok(CropRect::new(v[0], v[1], v[2], v[3]))
    }
}

/// Copies a window out of row-major `data` laid out with `channels` interleaved values per pixel.
pub(crate) fn crop_slice<T: Copy>(
    data: &[T],
    width: u32,
    channels: usize,
    rect: &CropRect,
) -> Vec<T> {
    let stride = width as usize * channels;
    let row_len = rect.w as usize * channels;
    let mut out = Vec::with_capacity(row_len * rect.h as usize);
    for y in rect.y0..rect.y0 + rect.h {
        let start = y as usize * stride + rect.x0 as usize * channels;
        out.extend_from_slice(&data[start..start + row_len]);
    }
    out
}

/// Crops a raw frame, re-deriving the Bayer phase from the crop origin.
pub fn crop(image: &RawImage, rect: &CropRect) -> Result<RawImage> {
    rect.check(image.width, image.height)?;
    Ok(RawImage {
        width: rect.w,
        height: rect.h,
        bit_depth: image.bit_depth,
        pattern: image.pattern.shifted(rect.x0, rect.y0),
        samples: crop_slice(&image.samples, image.width, 1, rect),
    })
}

pub fn write_raw_to<W: Write>(image: &RawImage, mut w: W) -> Result<()> {
    let mut header = [0u8; RAW_HEADER_LEN];
    header[..4].copy_from_slice(RAW_MAGIC);
    header[4] = RAW_VERSION;
    header[5..9].copy_from_slice(&image.width.to_le_bytes());
    header[9..13].copy_from_slice(&image.height.to_le_bytes());
    header[13] = image.bit_depth;
    header[14] = image.pattern.code();
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(image.samples.len() * 2);
    for s in &image.samples {
        body.extend_from_slice(&s.to_le_bytes());
    }
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_raw_from<R: Read>(mut r: R) -> Result<RawImage> {
    let mut header = [0u8; RAW_HEADER_LEN];
    let got = read_fully(&mut r, &mut header)?;
    if got < RAW_HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "raw header needs {RAW_HEADER_LEN} bytes, found {got}"
        )));
    }
    if &header[..4] != RAW_MAGIC {
        return Err(Error::MalformedHeader("missing NRAW magic".into()));
    }
    if header[4] != RAW_VERSION {
        return Err(Error::MalformedHeader(format!(
            "unsupported raw version {}",
            header[4]
        )));
    }
    let width = u32::from_le_bytes(header[5..9].try_into().unwrap());
    let height = u32::from_le_bytes(header[9..13].try_into().unwrap());
    let bit_depth = header[13];
    let pattern = BayerPattern::from_code(header[14])
        .ok_or_else(|| Error::MalformedHeader(format!("unknown Bayer code {}", header[14])))?;
    if !(8..=16).contains(&bit_depth) {
        return Err(Error::MalformedHeader(format!("bit depth {bit_depth}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("dimensions {width}x{height}")));
    }
    let n = width as usize * height as usize;
    let mut body = vec![0u8; n * 2];
    let got = read_fully(&mut r, &mut body)?;
    if got < body.len() {
        return Err(Error::Truncated {
            expected: body.len(),
            found: got,
        });
    }
    let samples = body
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    RawImage::new(width, height, bit_depth, pattern, samples)
}

pub fn write_raw(image: &RawImage, path: impl AsRef<Path>) -> Result<()> {
    write_raw_to(image, BufWriter::new(File::create(path)?))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawImage> {
    read_raw_from(BufReader::new(File::open(path)?))
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

/// Single-channel 16-bit image, as stored in a grayscale PNG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray16 {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl Gray16 {
    pub fn new(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width as usize * height as usize {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} with {} values",
                data.len()
            )));
        }
        Ok(Gray16 {
            width,
            height,
            data,
        })
    }
}

/// Decoded PNG in a uniform 16-bit sample buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PngImage {
    pub width: u32,
    pub height: u32,
    /// 1 for grayscale, 3 for RGB.
    pub channels: usize,
    /// 8 or 16.
    pub bit_depth: u8,
    pub data: Vec<u16>,
}

fn png_err(e: impl fmt::Display) -> Error {
    Error::Png(e.to_string())
}

pub fn write_png16_to<W: Write>(image: &Gray16, w: W) -> Result<()> {
    let mut enc = png::Encoder::new(w, image.width, image.height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    enc.set_compression(png::Compression::Fast);
    let mut writer = enc.write_header().map_err(png_err)?;
    let mut bytes = Vec::with_capacity(image.data.len() * 2);
    for v in &image.data {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    writer.write_image_data(&bytes).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

pub fn write_png16(image: &Gray16, path: impl AsRef<Path>) -> Result<()> {
    write_png16_to(image, BufWriter::new(File::create(path)?))
}

/// Writes an 8-bit grayscale (`channels == 1`) or RGB (`channels == 3`) PNG.
pub fn write_png8_to<W: Write>(
    width: u32,
    height: u32,
    channels: usize,
    data: &[u8],
    w: W,
) -> Result<()> {
    let color = match channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(Error::InvalidParameter(format!("{c} channels"))),
    };
    if data.len() != width as usize * height as usize * channels {
        return Err(Error::InvalidDimensions(format!(
            "{width}x{height}x{channels} with {} bytes",
            data.len()
        )));
    }
    let mut enc = png::Encoder::new(w, width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Fast);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Reads an 8- or 16-bit grayscale or RGB PNG.
pub fn read_png_from<R: Read>(mut r: R) -> Result<PngImage> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(Error::Png(format!("unsupported color type {other:?}"))),
    };
    let (bit_depth, data): (u8, Vec<u16>) = match info.bit_depth {
        png::BitDepth::Eight => (8, buf[..info.buffer_size()].iter().map(|&b| u16::from(b)).collect()),
        png::BitDepth::Sixteen => (
            16,
            buf[..info.buffer_size()]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect(),
        ),
        other => return Err(Error::Png(format!("unsupported bit depth {other:?}"))),
    };
    Ok(PngImage {
        width: info.width,
        height: info.height,
        channels,
        bit_depth,
        data,
    })
}

pub fn read_png(path: impl AsRef<Path>) -> Result<PngImage> {
    read_png_from(BufReader::new(File::open(path)?))
}

/// Reads a single-channel 16-bit PNG.
pub fn read_png16_from<R: Read>(r: R) -> Result<Gray16> {
    let img = read_png_from(r)?;
    if img.channels != 1 || img.bit_depth != 16 {
        return Err(Error::Png(format!(
            "expected 16-bit grayscale, found {}-bit with {} channel(s)",
            img.bit_depth, img.channels
        )));
    }
    Gray16::new(img.width, img.height, img.data)
}

pub fn read_png16(path: impl AsRef<Path>) -> Result<Gray16> {
    read_png16_from(BufReader::new(File::open(path)?))
}
