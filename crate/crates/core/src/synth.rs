//! Deterministic synthetic camera for tests and benchmarks.
//!
//! A pixel responds to a photon input `p` with
//! `clamp(round(g·p + o), 0, 2^bit_depth - 1)` where `g` and `o` are its gain
//! and offset. Defective pixels return a fixed value regardless of input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayer::{BayerPattern, Channel};
use crate::error::{Error, Result};
use crate::image::{max_value, RawImage};
use crate::par;
use crate::spectra::{photon_counts, PhotonTable, QeSet, Spectrum, LEVEL_COUNT};

/// Shape of a vignetted sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VignetteSpec {
    /// Gain at the optical centre.
    pub gain_center: f64,
    /// Gain in the frame corners.
    pub gain_corner: f64,
    /// Relative per-pixel gain jitter, uniform in `±jitter`.
    pub jitter: f64,
    /// Offsets are uniform in `0..=offset_max` counts.
    pub offset_max: f64,
    /// Fraction of pixels stuck at 0 or at full scale.
    pub defect_fraction: f64,
}

impl Default for VignetteSpec {
    fn default() -> Self {
        VignetteSpec {
            gain_center: 1.0,
            gain_corner: 0.7,
            jitter: 0.05,
            offset_max: 300.0,
            defect_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub width: u32,
    pub height: u32,
    pub pattern: BayerPattern,
    pub bit_depth: u8,
    pub seed: u64,
    pub gain: Vec<f64>,
    pub offset: Vec<f64>,
    /// `(pixel index, stuck value)`, sorted by index.
    pub defects: Vec<(usize, u16)>,
}

fn row_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl SensorModel {
    /// Sensor with the same gain and offset everywhere and no defects.
    pub fn uniform(width: u32, height: u32, pattern: BayerPattern, bit_depth: u8, gain: f64, offset: f64) -> Result<Self> {
        let n = width as usize * height as usize;
        SensorModel {
            width,
            height,
            pattern,
            bit_depth,
            seed: 0,
            gain: vec![gain; n],
            offset: vec![offset; n],
            defects: Vec::new(),
        }
        .validated()
    }

    /// Radial vignetting times per-pixel jitter, random offsets and optional stuck pixels.
    pub fn vignetted(
        width: u32,
        height: u32,
        pattern: BayerPattern,
        bit_depth: u8,
        seed: u64,
        spec: &VignetteSpec,
    ) -> Result<Self> {
        let n = width as usize * height as usize;
        let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        let r2_max = (cx * cx + cy * cy).max(1.0);
        let mut fields = vec![(0.0f64, 0.0f64); n];
        par::for_each_chunk_mut(&mut fields, width as usize, |y, row| {
            let mut rng = row_rng(seed, y as u64);
            let dy = y as f64 - cy;
            for (x, slot) in row.iter_mut().enumerate() {
                let dx = x as f64 - cx;
                let falloff = (dx * dx + dy * dy) / r2_max;
                let vignette = spec.gain_center - (spec.gain_center - spec.gain_corner) * falloff;
                let jitter = 1.0 + spec.jitter * (2.0 * rng.random::<f64>() - 1.0);
                let gain = (vignette * jitter).clamp(f64::MIN_POSITIVE, 1.0);
                let offset = spec.offset_max * rng.random::<f64>();
                *slot = (gain, offset);
            }
        });
        let mut defects = Vec::new();
        if spec.defect_fraction > 0.0 {
            let mut rng = row_rng(seed, u64::MAX);
            let full = max_value(bit_depth) as u16;
            for i in 0..n {
                if rng.random_bool(spec.defect_fraction) {
                    defects.push((i, if rng.random_bool(0.5) { full } else { 0 }));
                }
            }
        }
        SensorModel {
            width,
            height,
            pattern,
            bit_depth,
            seed,
            gain: fields.iter().map(|f| f.0).collect(),
            offset: fields.iter().map(|f| f.1).collect(),
            defects,
        }
        .validated()
    }

    /// Adds stuck pixels; later entries for the same index win.
    pub fn with_defects(mut self, defects: &[(usize, u16)]) -> Result<Self> {
        for &(i, v) in defects {
            match self.defects.binary_search_by_key(&i, |d| d.0) {
                Ok(slot) => self.defects[slot].1 = v,
                Err(slot) => self.defects.insert(slot, (i, v)),
            }
        }
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        let n = self.width as usize * self.height as usize;
        if n == 0 || self.gain.len() != n || self.offset.len() != n {
            return Err(Error::InvalidDimensions(format!("{}x{} sensor", self.width, self.height)));
        }
        if !(8..=16).contains(&self.bit_depth) {
            return Err(Error::InvalidBitDepth(self.bit_depth));
        }
        if self.gain.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return Err(Error::InvalidParameter("gain must lie in (0, 1]".into()));
        }
        if self.offset.iter().any(|o| !(o.is_finite() && *o >= 0.0)) {
            return Err(Error::InvalidParameter("offset must be >= 0".into()));
        }
        let max = max_value(self.bit_depth);
        if self.defects.iter().any(|&(i, v)| i >= n || u32::from(v) > max) {
            return Err(Error::InvalidParameter("defect outside frame or range".into()));
        }
        Ok(self)
    }

    #[inline]
    pub fn channel_at(&self, index: usize) -> Channel {
        let w = self.width as usize;
        self.pattern.channel_of((index % w) as u32, (index / w) as u32)
    }

    /// Response law without defects.
    #[inline]
    pub fn response(&self, index: usize, photons: f64) -> u16 {
        let max = f64::from(max_value(self.bit_depth));
        (self.gain[index] * photons + self.offset[index] + 0.5)
            .floor()
            .clamp(0.0, max) as u16
    }

    fn render_with<F>(&self, photons_at: F) -> Result<RawImage>
    where
        F: Fn(usize) -> f64 + Send + Sync,
    {
        let w = self.width as usize;
        let mut samples = vec![0u16; w * self.height as usize];
        par::for_each_chunk_mut(&mut samples, w, |y, row| {
            for (x, s) in row.iter_mut().enumerate() {
                let i = y * w + x;
                *s = self.response(i, photons_at(i));
            }
        });
        for &(i, v) in &self.defects {
            samples[i] = v;
        }
        RawImage::new(self.width, self.height, self.bit_depth, self.pattern, samples)
    }
}

/// Frame of a uniform scene delivering `photons[channel]` to each site.
pub fn render_level(model: &SensorModel, photons: [f64; 4]) -> Result<RawImage> {
    if photons.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidParameter("photon input must be >= 0".into()));
    }
    model.render_with(|i| photons[model.channel_at(i).index()])
}

/// Frame of an arbitrary scene: `photons[i]` reaches pixel `i`.
pub fn render_field(model: &SensorModel, photons: &[f64]) -> Result<RawImage> {
    if photons.len() != model.gain.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} photon values for {} pixels",
            photons.len(),
            model.gain.len()
        )));
    }
    if photons.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidParameter("photon input must be >= 0".into()));
    }
    model.render_with(|i| photons[i])
}

/// One frame per calibration level, L0..L7.
pub fn render_stack(model: &SensorModel, table: &PhotonTable) -> Result<Vec<RawImage>> {
    let levels: Vec<usize> = (0..LEVEL_COUNT).collect();
    par::try_map(&levels, |&k| {
        render_level(model, Channel::ALL.map(|ch| table.get(ch, k)))
    })
}

/// Lamp, gray filters and mosaic QE of a synthetic optical path.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptics {
    /// Light reaching the camera through each filter, L1..L7.
    pub levels: Vec<Spectrum>,
    pub qe: QeSet,
    pub table: PhotonTable,
}

/// Nominal transmittance of the six gray filters and the open path (L1..L7).
pub const FILTER_TRANSMITTANCE: [f64; LEVEL_COUNT - 1] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 1.0];

fn gaussian(x: f64, mu: f64, sigma: f64) -> f64 {
    (-0.5 * ((x - mu) / sigma).powi(2)).exp()
}

impl SyntheticOptics {
    /// White-LED-like lamp, slightly tilted gray filters and Gaussian QE
    /// curves, with the lamp scaled so the brightest L7 count equals `full_level`.
    pub fn new(full_level: f64) -> Result<Self> {
        let grid: Vec<f64> = (0..=200).map(|i| 380.0 + 2.0 * i as f64).collect();
        let lamp: Vec<f64> = grid
            .iter()
            .map(|&w| gaussian(w, 450.0, 12.0) + 0.6 * gaussian(w, 570.0, 60.0))
            .collect();
        let filtered = |scale: f64| -> Result<Vec<Spectrum>> {
            FILTER_TRANSMITTANCE
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    // L7 is the open path; the filters are mildly non-neutral
                    let tilt = if k == LEVEL_COUNT - 2 { 0.0 } else { 0.04 };
                    Spectrum::new(
                        grid.clone(),
                        grid.iter()
                            .zip(&lamp)
                            .map(|(&w, &l)| scale * l * t * (1.0 + tilt * (w - 580.0) / 200.0))
                            .collect(),
                    )
                })
                .collect()
        };
        let qe_grid: Vec<f64> = (0..=88).map(|i| 360.0 + 5.0 * i as f64).collect();
        let qe_curve = |mu: f64, sigma: f64, peak: f64| {
            Spectrum::efficiency(
                qe_grid.clone(),
                qe_grid.iter().map(|&w| peak * gaussian(w, mu, sigma)).collect(),
            )
        };
        let qe = QeSet::new(
            qe_curve(610.0, 40.0, 0.38)?,
            qe_curve(535.0, 45.0, 0.42)?,
            qe_curve(535.0, 45.0, 0.42)?,
            qe_curve(465.0, 35.0, 0.40)?,
        );
        let unit = photon_counts(&filtered(1.0)?, &qe)?;
        let levels = filtered(full_level / unit.max_full_level())?;
        let table = photon_counts(&levels, &qe)?;
        Ok(SyntheticOptics { levels, qe, table })
    }
}

/// Smooth textured scene in photons: each site receives a fraction
/// between 8% and 93% of its channel's L7 count. `frame` drifts the texture
/// so a series of frames differs like a time lapse.
pub fn textured_scene(width: u32, height: u32, pattern: BayerPattern, table: &PhotonTable, frame: u32) -> Vec<f64> {
    let w = width as usize;
    let mut out = vec![0.0; w * height as usize];
    let phase = frame as f64 * 0.15;
    let full = Channel::ALL.map(|ch| table.get(ch, LEVEL_COUNT - 1));
    par::for_each_chunk_mut(&mut out, w, |y, row| {
        let v = y as f64 / height as f64;
        for (x, p) in row.iter_mut().enumerate() {
            let u = x as f64 / width as f64;
            let t = 0.5
                + 0.25 * (7.0 * u + 3.0 * v + phase).sin()
                + 0.15 * (11.0 * v - 5.0 * u + 2.0 * phase).cos()
                + 0.1 * (23.0 * (u + v) + phase).sin();
            let ch = pattern.channel_of(x as u32, y as u32);
            *p = full[ch.index()] * (0.08 + 0.85 * t.clamp(0.0, 1.0));
        }
    });
    out
}

/// Ground-truth sidecar for a rendered sensor.
pub fn format_ground_truth(model: &SensorModel, table: &PhotonTable, extra: &[(String, String)]) -> String {
    let (gmin, gmax) = model
        .gain
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    let omax = model.offset.iter().copied().fold(0.0, f64::max);
    let mut s = format!(
        "width = {}\nheight = {}\nbayer = {}\nbit_depth = {}\nseed = {}\ngain_min = {gmin:?}\ngain_max = {gmax:?}\noffset_max = {omax:?}\ndefects = {}\n",
        model.width,
        model.height,
        model.pattern,
        model.bit_depth,
        model.seed,
        model.defects.len()
    );
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str(&crate::spectra::format_photon_table(table));
    s
}
