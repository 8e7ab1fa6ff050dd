//! Sampled spectra, the quantum-efficiency set of the mosaic and the
//! per-level photon table derived from them.

use std::fs;
use std::path::Path;

use crate::bayer::Channel;
use crate::error::{Error, Result};

/// Number of calibration levels, dark (L0) through unfiltered (L7).
pub const LEVEL_COUNT: usize = 8;

/// Wavelength-sampled curve with strictly increasing wavelengths (nm).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    wavelengths: Vec<f64>,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != values.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} wavelengths but {} values",
                wavelengths.len(),
                values.len()
            )));
        }
        if wavelengths.len() < 2 {
            return Err(Error::InvalidSpectrum("fewer than 2 samples".into()));
        }
        if let Some(w) = wavelengths.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("non-finite wavelength {w}")));
        }
        if let Some(i) = (1..wavelengths.len()).find(|&i| wavelengths[i] <= wavelengths[i - 1]) {
            return Err(Error::InvalidSpectrum(format!(
                "wavelengths not increasing at {} nm -> {} nm",
                wavelengths[i - 1],
                wavelengths[i]
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidSpectrum(format!("negative or non-finite value {v}")));
        }
        Ok(Spectrum {
            wavelengths,
            values,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Spectrum::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    /// Like [`Spectrum::new`] but additionally requires every value to be a fraction in `[0, 1]`.
    pub fn efficiency(wavelengths: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = Spectrum::new(wavelengths, values)?;
        if let Some(v) = s.values.iter().find(|v| **v > 1.0) {
            return Err(Error::InvalidSpectrum(format!("efficiency {v} exceeds 1")));
        }
        Ok(s)
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_wavelength(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn max_wavelength(&self) -> f64 {
        *self.wavelengths.last().unwrap()
    }

    /// Multiplies every value by `factor` (must be finite and non-negative).
    pub fn scaled(&self, factor: f64) -> Result<Spectrum> {
        Spectrum::new(
            self.wavelengths.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Linear interpolation at a wavelength inside the support.
    pub fn value_at(&self, wavelength: f64) -> Result<f64> {
        let (lo, hi) = (self.min_wavelength(), self.max_wavelength());
        if !(wavelength >= lo && wavelength <= hi) {
            return Err(Error::OutsideSupport {
                wavelength,
                min: lo,
                max: hi,
            });
        }
        // index of the first node strictly greater than `wavelength`
        let upper = self.wavelengths.partition_point(|&w| w <= wavelength);
        if upper == 0 {
            return Ok(self.values[0]);
        }
        let k = upper - 1;
        if self.wavelengths[k] == wavelength || k + 1 == self.len() {
            return Ok(self.values[k]);
        }
        let (w0, w1) = (self.wavelengths[k], self.wavelengths[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        Ok(v0 + (v1 - v0) * (wavelength - w0) / (w1 - w0))
    }
}

/// Parses a two-column `wavelength value` table.
///
/// Columns may be separated by whitespace, commas or semicolons. Lines that
/// are blank or start with `#` are skipped.
pub fn parse_spectrum(text: &str) -> Result<Spectrum> {
    let rows = parse_columns(text, 2)?;
    if rows.len() < 2 {
        return Err(Error::InvalidSpectrum(format!(
            "need at least 2 rows, found {}",
            rows.len()
        )));
    }
    let wavelengths: Vec<f64> = rows.iter().map(|r| r.1[0]).collect();
    if let Some(i) = (1..rows.len()).find(|&i| wavelengths[i] <= wavelengths[i - 1]) {
        return Err(Error::Parse {
            line: rows[i].0,
            message: "wavelengths not increasing".into(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.1[1] < 0.0) {
        return Err(Error::Parse {
            line: r.0,
            message: format!("negative value {}", r.1[1]),
        });
    }
    Spectrum::new(wavelengths, rows.iter().map(|r| r.1[1]).collect())
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<Spectrum> {
    parse_spectrum(&fs::read_to_string(path)?)
}

/// Splits a numeric table into `(line_number, values)` rows of exactly `columns` values.
fn parse_columns(text: &str, columns: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t
            .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != columns {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {columns} columns, found {}", fields.len()),
            });
        }
        let mut values = Vec::with_capacity(columns);
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: '{f}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value '{f}'"),
                });
            }
            values.push(v);
        }
        rows.push((line_no, values));
    }
    Ok(rows)
}

/// Renders a spectrum as a two-column table readable by [`parse_spectrum`].
pub fn format_spectrum(s: &Spectrum) -> String {
    let mut out = String::from("# wavelength_nm value\n");
    for (w, v) in s.wavelengths.iter().zip(&s.values) {
        out.push_str(&format!("{w:?} {v:?}\n"));
    }
    out
}

/// Interpolated values of `s` at each grid wavelength. No extrapolation.
pub fn resample_values(s: &Spectrum, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&w| s.value_at(w)).collect()
}

/// Samples `s` on `grid` by linear interpolation. No extrapolation.
pub fn resample(s: &Spectrum, grid: &[f64]) -> Result<Spectrum> {
    Spectrum::new(grid.to_vec(), resample_values(s, grid)?)
}

/// Nodes used to multiply `a` by `b`: the nodes of whichever spectrum is
/// denser over the shared support, clipped to it, with the support endpoints
/// added. Equal density falls back to the union of both node sets.
fn product_grid(a: &Spectrum, b: &Spectrum) -> Result<Vec<f64>> {
    let lo = a.min_wavelength().max(b.min_wavelength());
    let hi = a.max_wavelength().min(b.max_wavelength());
    if lo >= hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::EmptyIntersection);
    }
    let inside = |s: &Spectrum| -> Vec<f64> {
        s.wavelengths
            .iter()
            .copied()
            .filter(|&w| w > lo && w < hi)
            .collect()
    };
    let (na, nb) = (inside(a), inside(b));
    let mut interior = match na.len().cmp(&nb.len()) {
        std::cmp::Ordering::Greater => na,
        std::cmp::Ordering::Less => nb,
        std::cmp::Ordering::Equal => {
            let mut u = na;
            u.extend(nb);
            u.sort_by(f64::total_cmp);
            u.dedup();
            u
        }
    };
    let mut grid = Vec::with_capacity(interior.len() + 2);
    grid.push(lo);
    grid.append(&mut interior);
    grid.push(hi);
    Ok(grid)
}

/// Pointwise product over the intersection of both supports.
pub fn multiply(light: &Spectrum, qe: &Spectrum) -> Result<Spectrum> {
    let grid = product_grid(light, qe)?;
    let a = resample(light, &grid)?;
    let b = resample(qe, &grid)?;
    Spectrum::new(
        grid,
        a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
    )
}

/// Trapezoidal area under the sampled curve.
pub fn integrate_trapezoid(s: &Spectrum) -> f64 {
    s.wavelengths
        .windows(2)
        .zip(s.values.windows(2))
        .map(|(w, v)| 0.5 * (v[0] + v[1]) * (w[1] - w[0]))
        .sum()
}

/// Quantum-efficiency curves of the four mosaic sites.
#[derive(Debug, Clone, PartialEq)]
pub struct QeSet {
    curves: [Spectrum; 4],
}

impl QeSet {
    pub fn new(r: Spectrum, g1: Spectrum, g2: Spectrum, b: Spectrum) -> Self {
        QeSet {
            curves: [r, g1, g2, b],
        }
    }

    pub fn get(&self, channel: Channel) -> &Spectrum {
        &self.curves[channel.index()]
    }

    pub fn curves(&self) -> &[Spectrum; 4] {
        &self.curves
    }
}

/// Parses a five-column table `wavelength qe_R qe_G1 qe_G2 qe_B`.
pub fn parse_qe_table(text: &str) -> Result<QeSet> {
    let rows = parse_columns(text, 5)?;
    let wavelengths: Vec<f64> = rows.iter().map(|r| r.1[0]).collect();
    let column = |c: usize| -> Result<Spectrum> {
        Spectrum::efficiency(wavelengths.clone(), rows.iter().map(|r| r.1[c]).collect())
    };
    Ok(QeSet::new(column(1)?, column(2)?, column(3)?, column(4)?))
}

pub fn load_qe_table(path: impl AsRef<Path>) -> Result<QeSet> {
    parse_qe_table(&fs::read_to_string(path)?)
}

pub fn format_qe_table(qe: &QeSet) -> Result<String> {
    let grid = qe.curves[0].wavelengths();
    if qe.curves.iter().any(|c| c.wavelengths() != grid) {
        return Err(Error::InvalidSpectrum(
            "QE curves must share one grid to be written as a table".into(),
        ));
    }
    let mut out = String::from("# wavelength_nm qe_R qe_G1 qe_G2 qe_B\n");
    for (i, w) in grid.iter().enumerate() {
        out.push_str(&format!("{w:?}"));
        for c in &qe.curves {
            out.push_str(&format!(" {:?}", c.values()[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Relative photon counts per mosaic site and calibration level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonTable {
    counts: [[f64; LEVEL_COUNT]; 4],
}

impl PhotonTable {
    /// Validates `counts[channel][level]`: finite, `L0 == 0`, non-decreasing.
    pub fn new(counts: [[f64; LEVEL_COUNT]; 4]) -> Result<Self> {
        for ch in Channel::ALL {
            let row = &counts[ch.index()];
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "photon count {v} for channel {ch}"
                )));
            }
            if row[0] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "L0 photon count for channel {ch} is {}, must be 0",
                    row[0]
                )));
            }
            for k in 1..LEVEL_COUNT {
                if row[k] < row[k - 1] {
                    return Err(Error::NonMonotone {
                        channel: ch.name().into(),
                        from: k - 1,
                        to: k,
                        from_value: row[k - 1],
                        to_value: row[k],
                    });
                }
            }
        }
        Ok(PhotonTable { counts })
    }

    #[inline]
    pub fn get(&self, channel: Channel, level: usize) -> f64 {
        self.counts[channel.index()][level]
    }

    #[inline]
    pub fn row(&self, channel: Channel) -> &[f64; LEVEL_COUNT] {
        &self.counts[channel.index()]
    }

    pub fn counts(&self) -> &[[f64; LEVEL_COUNT]; 4] {
        &self.counts
    }

    /// Largest L7 count over the four channels.
    pub fn max_full_level(&self) -> f64 {
        self.counts
            .iter()
            .map(|r| r[LEVEL_COUNT - 1])
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<PhotonTable> {
        let mut counts = self.counts;
        counts.iter_mut().flatten().for_each(|v| *v *= factor);
        PhotonTable::new(counts)
    }
}

/// Integrates each level spectrum (L1..L7) against each channel's QE.
///
/// L0 is dark and defined as zero photons.
pub fn photon_counts(levels: &[Spectrum], qe: &QeSet) -> Result<PhotonTable> {
    if levels.len() != LEVEL_COUNT - 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} level spectra (L1..L7), got {}",
            LEVEL_COUNT - 1,
            levels.len()
        )));
    }
    let mut counts = [[0.0; LEVEL_COUNT]; 4];
    for ch in Channel::ALL {
        for (k, level) in levels.iter().enumerate() {
            let incident = multiply(level, qe.get(ch))?;
            counts[ch.index()][k + 1] = integrate_trapezoid(&incident);
        }
    }
    PhotonTable::new(counts)
}

/// Text rendering of the table, one row per channel.
pub fn format_photon_table(table: &PhotonTable) -> String {
    let mut out = String::from("# channel L0 L1 L2 L3 L4 L5 L6 L7\n");
    for ch in Channel::ALL {
        out.push_str(ch.name());
        for v in table.row(ch) {
            out.push_str(&format!(" {v:?}"));
        }
        out.push('\n');
    }
    out
}
