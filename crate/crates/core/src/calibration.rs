//! Per-pixel intensity -> photon calibration curves.
//!
//! Each pixel carries eight knot intensities, one per calibration level
//! L0..L7, paired with the photon count of its channel at that level. Knot
//! intensities are kept in 1/16 fixed point so fractional means from a
//! window of frames survive persistence.
//!
//! The NCAL container, all integers little-endian:
//!
//! ```text
//! "NCAL" | version u8 | width u32 | height u32 | bayer u8
//! photon table: 4 channels x 8 levels f64 (R, G1, G2, B; L0..L7)
//! metadata length u32 | metadata UTF-8 ("key=value" lines)
//! knots: width*height*8 u16, pixel-major, value = round(mean * 16)
//! defect flags: width*height u8
//! CRC32 of all preceding bytes, u32
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::bayer::{BayerPattern, Channel};
use crate::error::{Error, Result};
use crate::image::RawImage;
use crate::par;
use crate::spectra::{PhotonTable, LEVEL_COUNT};

pub const CAL_MAGIC: &[u8; 4] = b"NCAL";
pub const CAL_VERSION: u8 = 1;
/// Fixed bytes before the metadata block.
pub const CAL_FIXED_HEADER_LEN: usize = 4 + 1 + 4 + 4 + 1 + 4 * LEVEL_COUNT * 8 + 4;
/// Fixed-point scale of stored knot intensities.
pub const KNOT_SCALE: f64 = 16.0;
/// Largest tolerated fraction of defective pixels.
pub const MAX_DEFECT_FRACTION: f64 = 0.2;
/// Minimum number of donor curves for a defective pixel.
const MIN_DONORS: usize = 3;

/// Real-valued single-plane image, e.g. the mean of a window of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl LevelImage {
    pub fn from_raw(raw: &RawImage) -> Self {
        LevelImage {
            width: raw.width(),
            height: raw.height(),
            values: raw.samples().iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Per-pixel mean over frames `center - half_window ..= center + half_window`.
pub fn mean_level_image(frames: &[RawImage], center: usize, half_window: usize) -> Result<LevelImage> {
    if frames.is_empty() {
        return Err(Error::Empty("level stack".into()));
    }
    if center < half_window || center + half_window >= frames.len() {
        return Err(Error::InvalidParameter(format!(
            "window {center}±{half_window} outside stack of {} frames",
            frames.len()
        )));
    }
    let first = &frames[0];
    if let Some(f) = frames
        .iter()
        .find(|f| f.width() != first.width() || f.height() != first.height() || f.pattern() != first.pattern())
    {
        return Err(Error::DimensionMismatch(format!(
            "stack mixes {}x{} {} with {}x{} {}",
            first.width(),
            first.height(),
            first.pattern(),
            f.width(),
            f.height(),
            f.pattern()
        )));
    }
    let window = &frames[center - half_window..=center + half_window];
    let count = window.len() as f64;
    let width = first.width() as usize;
    let mut values = vec![0.0; first.len()];
    par::for_each_chunk_mut(&mut values, width, |row, out| {
        let start = row * width;
        for (x, v) in out.iter_mut().enumerate() {
            let sum: u64 = window.iter().map(|f| u64::from(f.samples()[start + x])).sum();
            *v = sum as f64 / count;
        }
    });
    Ok(LevelImage {
        width: first.width(),
        height: first.height(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveStatus {
    Ok,
    Defective,
}

/// Calibration curve of one pixel: knot intensities (digital counts) and
/// the photon counts they map to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCurve {
    pub intensities: [f64; LEVEL_COUNT],
    pub photons: [f64; LEVEL_COUNT],
    pub status: CurveStatus,
}

/// Free-form provenance stored alongside the curves.
pub type Metadata = BTreeMap<String, String>;

/// Calibration of every pixel of one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMap {
    width: u32,
    height: u32,
    pattern: BayerPattern,
    table: PhotonTable,
    /// `width * height * 8` fixed-point knot intensities.
    knots: Vec<u16>,
    defects: Vec<bool>,
    metadata: Metadata,
    /// Donor-median knots of defective pixels, sorted by pixel index.
    fallback: Vec<(usize, [f64; LEVEL_COUNT])>,
}

#[inline]
fn strictly_increasing(k: &[u16]) -> bool {
    k.windows(2).all(|w| w[0] < w[1])
}

/// `round(mean * 16)`, half up, if it fits the stored u16.
fn quantize_knot(mean: f64) -> Option<u16> {
    let q = (mean * KNOT_SCALE + 0.5).floor();
    (0.0..=f64::from(u16::MAX)).contains(&q).then_some(q as u16)
}

/// Builds per-pixel curves from the eight mean level images L0..L7.
///
/// Pixels whose knot intensities are not strictly increasing are flagged
/// defective and later corrected through the median curve of nearby
/// same-channel pixels.
pub fn build_calibration(
    level_means: &[LevelImage],
    table: &PhotonTable,
    pattern: BayerPattern,
) -> Result<CalibrationMap> {
    if level_means.len() != LEVEL_COUNT {
        return Err(Error::InvalidParameter(format!(
            "expected {LEVEL_COUNT} level images, got {}",
            level_means.len()
        )));
    }
    let (width, height) = (level_means[0].width, level_means[0].height);
    let n = width as usize * height as usize;
    for (k, img) in level_means.iter().enumerate() {
        if img.width != width || img.height != height || img.values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "level L{k} is {}x{}, L0 is {width}x{height}",
                img.width, img.height
            )));
        }
    }
    if let Some(&v) = level_means
        .iter()
        .flat_map(|l| &l.values)
        .find(|&&v| quantize_knot(v).is_none())
    {
        return Err(Error::InvalidParameter(format!(
            "level mean {v} outside the storable range 0..={}",
            f64::from(u16::MAX) / KNOT_SCALE
        )));
    }
    let mut knots = vec![0u16; n * LEVEL_COUNT];
    let row_len = width as usize * LEVEL_COUNT;
    par::for_each_chunk_mut(&mut knots, row_len, |y, row| {
        let base = y * width as usize;
        for (x, pixel) in row.chunks_exact_mut(LEVEL_COUNT).enumerate() {
            for (slot, img) in pixel.iter_mut().zip(level_means) {
                *slot = quantize_knot(img.values[base + x]).unwrap_or(0);
            }
        }
    });
    let defects: Vec<bool> = knots
        .chunks_exact(LEVEL_COUNT)
        .map(|k| !strictly_increasing(k))
        .collect();
    let defective = defects.iter().filter(|&&d| d).count();
    if defective as f64 > MAX_DEFECT_FRACTION * n as f64 {
        return Err(Error::TooManyDefects { defective, total: n });
    }
    CalibrationMap::from_parts(width, height, pattern, *table, knots, defects, Metadata::new())
}

impl CalibrationMap {
    /// Assembles a map from stored parts and derives the defect fallbacks.
    pub fn from_parts(
        width: u32,
        height: u32,
        pattern: BayerPattern,
        table: PhotonTable,
        knots: Vec<u16>,
        defects: Vec<bool>,
        metadata: Metadata,
    ) -> Result<Self> {
        let n = width as usize * height as usize;
        if width == 0 || height == 0 || knots.len() != n * LEVEL_COUNT || defects.len() != n {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} map with {} knots and {} flags",
                knots.len(),
                defects.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| !defects[i] && !strictly_increasing(&knots[i * LEVEL_COUNT..(i + 1) * LEVEL_COUNT])) {
            return Err(Error::InvalidParameter(format!(
                "pixel {i} is not flagged defective but its knots are not increasing"
            )));
        }
        let mut map = CalibrationMap {
            width,
            height,
            pattern,
            table,
            knots,
            defects,
            metadata,
            fallback: Vec::new(),
        };
        map.fallback = map.compute_fallbacks()?;
        Ok(map)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn photon_table(&self) -> &PhotonTable {
        &self.table
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut Metadata {
        &mut self.metadata
    }

    pub fn raw_knots(&self) -> &[u16] {
        &self.knots
    }

    pub fn defect_mask(&self) -> &[bool] {
        &self.defects
    }

    pub fn defect_count(&self) -> usize {
        self.fallback.len()
    }

    pub fn defect_fraction(&self) -> f64 {
        self.fallback.len() as f64 / self.defects.len() as f64
    }

    #[inline]
    pub fn is_defective(&self, index: usize) -> bool {
        self.defects[index]
    }

    /// Stored knot intensities of pixel `index`, in digital counts.
    #[inline]
    pub fn knot_intensities(&self, index: usize) -> [f64; LEVEL_COUNT] {
        let k = &self.knots[index * LEVEL_COUNT..(index + 1) * LEVEL_COUNT];
        std::array::from_fn(|i| f64::from(k[i]) / KNOT_SCALE)
    }

    #[inline]
    fn channel_at(&self, index: usize) -> Channel {
        let w = self.width as usize;
        self.pattern.channel_of((index % w) as u32, (index / w) as u32)
    }

    /// The pixel's own curve, whatever its status.
    pub fn curve(&self, x: u32, y: u32) -> PixelCurve {
        let i = y as usize * self.width as usize + x as usize;
        PixelCurve {
            intensities: self.knot_intensities(i),
            photons: *self.table.row(self.channel_at(i)),
            status: if self.defects[i] {
                CurveStatus::Defective
            } else {
                CurveStatus::Ok
            },
        }
    }

    /// Curve used to correct pixel `index`: its own, or the donor median when defective.
    #[inline]
    pub fn effective_intensities(&self, index: usize) -> [f64; LEVEL_COUNT] {
        if self.defects[index] {
            let slot = self
                .fallback
                .binary_search_by_key(&index, |f| f.0)
                .expect("every defective pixel has a fallback");
            self.fallback[slot].1
        } else {
            self.knot_intensities(index)
        }
    }

    /// Median knot curve of the nearest non-defective pixels of the same
    /// channel, searched in square rings of growing radius until at least
    /// three donors are found.
    fn donor_median(&self, index: usize) -> Option<[f64; LEVEL_COUNT]> {
        let (w, h) = (self.width as i64, self.height as i64);
        let (cx, cy) = ((index as i64) % w, (index as i64) / w);
        let channel = self.channel_at(index);
        let mut donors: Vec<usize> = Vec::new();
        let max_r = w.max(h);
        for r in 1..=max_r {
            for dy in -r..=r {
                let y = cy + dy;
                if y < 0 || y >= h {
                    continue;
                }
                let step = if dy.abs() == r { 1 } else { 2 * r };
                let mut dx = -r;
                while dx <= r {
                    let x = cx + dx;
                    if x >= 0 && x < w {
                        let j = (y * w + x) as usize;
                        if !self.defects[j] && self.channel_at(j) == channel {
                            donors.push(j);
                        }
                    }
                    dx += step;
                }
            }
            if donors.len() >= MIN_DONORS {
                break;
            }
        }
        if donors.is_empty() {
            return None;
        }
        let mut out = [0.0; LEVEL_COUNT];
        let mut column: Vec<u16> = Vec::with_capacity(donors.len());
        for (k, slot) in out.iter_mut().enumerate() {
            column.clear();
            column.extend(donors.iter().map(|&j| self.knots[j * LEVEL_COUNT + k]));
            column.sort_unstable();
            let m = column.len();
            let med = if m % 2 == 1 {
                f64::from(column[m / 2])
            } else {
                (f64::from(column[m / 2 - 1]) + f64::from(column[m / 2])) / 2.0
            };
            *slot = med / KNOT_SCALE;
        }
        Some(out)
    }

    fn compute_fallbacks(&self) -> Result<Vec<(usize, [f64; LEVEL_COUNT])>> {
        let defective: Vec<usize> = (0..self.defects.len()).filter(|&i| self.defects[i]).collect();
        par::try_map(&defective, |&i| {
            self.donor_median(i).map(|k| (i, k)).ok_or_else(|| {
                Error::InvalidParameter(format!("defective pixel {i} has no same-channel donor"))
            })
        })
    }

    /// Exact byte size of this map in the NCAL container.
    pub fn encoded_len(&self) -> usize {
        CAL_FIXED_HEADER_LEN + encode_metadata(&self.metadata).len() + self.defects.len() * (LEVEL_COUNT * 2 + 1) + 4
    }
}

fn encode_metadata(meta: &Metadata) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    s
}

fn decode_metadata(text: &str) -> Result<Metadata> {
    let mut meta = Metadata::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::MalformedHeader(format!("metadata line '{line}'")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    Ok(meta)
}

fn check_metadata(meta: &Metadata) -> Result<()> {
    for (k, v) in meta {
        if k.is_empty() || k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) {
            return Err(Error::InvalidParameter(format!("metadata entry '{k}' is not storable")));
        }
    }
    Ok(())
}

struct HashingWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

pub fn save_calibration_to<W: Write>(map: &CalibrationMap, w: W) -> Result<()> {
    check_metadata(&map.metadata)?;
    let mut out = HashingWriter {
        inner: w,
        hasher: crc32fast::Hasher::new(),
    };
    out.write_all(CAL_MAGIC)?;
    out.write_all(&[CAL_VERSION])?;
    out.write_all(&map.width.to_le_bytes())?;
    out.write_all(&map.height.to_le_bytes())?;
    out.write_all(&[map.pattern.code()])?;
    for row in map.table.counts() {
        for v in row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    let meta = encode_metadata(&map.metadata);
    out.write_all(&(meta.len() as u32).to_le_bytes())?;
    out.write_all(meta.as_bytes())?;
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in map.knots.chunks(1 << 15) {
        buf.clear();
        for k in chunk {
            buf.extend_from_slice(&k.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    for chunk in map.defects.chunks(1 << 16) {
        buf.clear();
        buf.extend(chunk.iter().map(|&d| u8::from(d)));
        out.write_all(&buf)?;
    }
    let crc = out.hasher.clone().finalize();
    out.inner.write_all(&crc.to_le_bytes())?;
    out.inner.flush()?;
    Ok(())
}

pub fn save_calibration(map: &CalibrationMap, path: impl AsRef<Path>) -> Result<()> {
    save_calibration_to(map, BufWriter::new(File::create(path)?))
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Truncated {
                expected: self.pos + n,
                found: self.data.len(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes an NCAL byte buffer (magic, version, then checksum, then body).
pub fn decode_calibration(bytes: &[u8]) -> Result<CalibrationMap> {
    if bytes.len() < 5 || &bytes[..4] != CAL_MAGIC {
        return Err(Error::MalformedHeader("missing NCAL magic".into()));
    }
    if bytes[4] != CAL_VERSION {
        return Err(Error::VersionMismatch {
            found: bytes[4],
            expected: CAL_VERSION,
        });
    }
    if bytes.len() < CAL_FIXED_HEADER_LEN + 4 {
        return Err(Error::Checksum {
            stored: 0,
            computed: crc32fast::hash(bytes),
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut c = Cursor { data: body, pos: 5 };
    let width = c.u32()?;
    let height = c.u32()?;
    let code = c.take(1)?[0];
    let pattern = BayerPattern::from_code(code)
        .ok_or_else(|| Error::MalformedHeader(format!("unknown Bayer code {code}")))?;
    let mut counts = [[0.0; LEVEL_COUNT]; 4];
    for row in counts.iter_mut() {
        for v in row.iter_mut() {
            *v = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
        }
    }
    let table = PhotonTable::new(counts)?;
    let meta_len = c.u32()? as usize;
    let meta_text = std::str::from_utf8(c.take(meta_len)?)
        .map_err(|_| Error::MalformedHeader("metadata is not UTF-8".into()))?;
    let metadata = decode_metadata(meta_text)?;
    let n = width as usize * height as usize;
    let knots = c
        .take(n * LEVEL_COUNT * 2)?
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    let defects = c.take(n)?.iter().map(|&b| b != 0).collect();
    if c.pos != body.len() {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes",
            body.len() - c.pos
        )));
    }
    CalibrationMap::from_parts(width, height, pattern, table, knots, defects, metadata)
}

pub fn load_calibration_from<R: Read>(mut r: R) -> Result<CalibrationMap> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_calibration(&bytes)
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationMap> {
    let mut f = File::open(path)?;
    let len = f.metadata().map(|m| m.len() as usize).unwrap_or(0);
    let mut bytes = Vec::with_capacity(len);
    f.read_to_end(&mut bytes)?;
    decode_calibration(&bytes)
}

/// Human-readable summary of a calibration run.
pub fn format_report(map: &CalibrationMap) -> String {
    let mut out = String::new();
    out.push_str(&format!("dimensions {}x{}\n", map.width, map.height));
    out.push_str(&format!("bayer {}\n", map.pattern));
    out.push_str(&format!(
        "defective_pixels {} ({:.6} %)\n",
        map.defect_count(),
        100.0 * map.defect_fraction()
    ));
    out.push_str(&crate::spectra::format_photon_table(&map.table));
    for (k, v) in &map.metadata {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
