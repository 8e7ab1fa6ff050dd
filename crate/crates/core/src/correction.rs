//! Raw frame -> photon image conversion and 14-bit quantization.

use crate::calibration::{CalibrationMap, LevelImage};
use crate::error::{Error, Result};
use crate::image::{Gray16, RawImage};
use crate::par;
use crate::bayer::BayerPattern;
use crate::spectra::LEVEL_COUNT;

/// Largest code of the 14-bit output.
pub const CODE_MAX_14: u16 = 16383;

/// Photons at `intensity` on the piecewise-linear curve through the knots.
///
/// Below the first knot the result is `photons[0]`, above the last knot
/// `photons[7]`. At a knot the tabulated photon count is returned exactly.
#[inline]
pub fn correct_pixel(intensities: &[f64; LEVEL_COUNT], photons: &[f64; LEVEL_COUNT], intensity: f64) -> f64 {
    if intensity <= intensities[0] {
        return photons[0];
    }
    if intensity >= intensities[LEVEL_COUNT - 1] {
        return photons[LEVEL_COUNT - 1];
    }
    // largest k with intensities[k] <= intensity; k < 7 here
    let mut k = 0;
    while intensities[k + 1] <= intensity {
        k += 1;
    }
    let (i0, i1) = (intensities[k], intensities[k + 1]);
    let (p0, p1) = (photons[k], photons[k + 1]);
    p0 + (p1 - p0) * ((intensity - i0) / (i1 - i0))
}

/// Per-pixel photon counts of a corrected frame, still in mosaic layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonImage {
    pub width: u32,
    pub height: u32,
    pub pattern: BayerPattern,
    pub values: Vec<f64>,
    /// Photon count that maps to the top 14-bit code.
    pub full_scale: f64,
    pub stats: CorrectionStats,
}

/// Counters gathered while correcting a frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorrectionStats {
    /// Pixels at or below their L0 knot.
    pub clamped_low: u64,
    /// Pixels at or above their L7 knot.
    pub clamped_high: u64,
    /// Pixels corrected through a donor curve.
    pub fallback: u64,
}

impl CorrectionStats {
    fn merge(self, other: CorrectionStats) -> CorrectionStats {
        CorrectionStats {
            clamped_low: self.clamped_low + other.clamped_low,
            clamped_high: self.clamped_high + other.clamped_high,
            fallback: self.fallback + other.fallback,
        }
    }
}

fn correct_values<F>(map: &CalibrationMap, sample: F) -> (Vec<f64>, CorrectionStats)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let width = map.width() as usize;
    let n = width * map.height() as usize;
    let table = map.photon_table();
    let pattern = map.pattern();
    let mut values = vec![0.0; n];
    let mut row_stats = vec![CorrectionStats::default(); map.height() as usize];
    {
        let mut rows: Vec<(&mut [f64], &mut CorrectionStats)> =
            values.chunks_mut(width).zip(row_stats.iter_mut()).collect();
        par::for_each_chunk_mut(&mut rows, 1, |y, job| {
            let (out, stats) = &mut job[0];
            let photons_even = table.row(pattern.channel_of(0, y as u32));
            let photons_odd = table.row(pattern.channel_of(1, y as u32));
            for (x, v) in out.iter_mut().enumerate() {
                let i = y * width + x;
                let photons = if x & 1 == 0 { photons_even } else { photons_odd };
                let knots = map.effective_intensities(i);
                if map.is_defective(i) {
                    stats.fallback += 1;
                }
                let s = sample(i);
                if s <= knots[0] {
                    stats.clamped_low += 1;
                } else if s >= knots[LEVEL_COUNT - 1] {
                    stats.clamped_high += 1;
                }
                *v = correct_pixel(&knots, photons, s);
            }
        });
    }
    let stats = row_stats
        .into_iter()
        .fold(CorrectionStats::default(), CorrectionStats::merge);
    (values, stats)
}

fn check_shape(map: &CalibrationMap, width: u32, height: u32) -> Result<()> {
    if map.width() != width || map.height() != height {
        return Err(Error::DimensionMismatch(format!(
            "frame is {width}x{height}, calibration is {}x{}",
            map.width(),
            map.height()
        )));
    }
    Ok(())
}

/// Converts every pixel of `raw` to photons through its calibration curve.
pub fn correct_image(map: &CalibrationMap, raw: &RawImage) -> Result<PhotonImage> {
    check_shape(map, raw.width(), raw.height())?;
    if raw.pattern() != map.pattern() {
        return Err(Error::DimensionMismatch(format!(
            "frame pattern {} differs from calibration pattern {}",
            raw.pattern(),
            map.pattern()
        )));
    }
    let samples = raw.samples();
    let (values, stats) = correct_values(map, |i| f64::from(samples[i]));
    Ok(PhotonImage {
        width: raw.width(),
        height: raw.height(),
        pattern: raw.pattern(),
        values,
        full_scale: map.photon_table().max_full_level(),
        stats,
    })
}

/// Same as [`correct_image`] for a real-valued frame such as a mean level image.
pub fn correct_level_image(map: &CalibrationMap, img: &LevelImage) -> Result<PhotonImage> {
    check_shape(map, img.width, img.height)?;
    let (values, stats) = correct_values(map, |i| img.values[i]);
    Ok(PhotonImage {
        width: img.width,
        height: img.height,
        pattern: map.pattern(),
        values,
        full_scale: map.photon_table().max_full_level(),
        stats,
    })
}

/// `round(16383 * min(v, full_scale) / full_scale)`, rounding half up.
#[inline]
pub fn quantize_value14(value: f64, full_scale: f64) -> u16 {
    let ratio = value.max(0.0).min(full_scale) / full_scale;
    (ratio * f64::from(CODE_MAX_14) + 0.5).floor() as u16
}

/// Maps photon counts onto 0..=16383 with a shared full scale.
pub fn quantize14(img: &PhotonImage, full_scale: f64) -> Result<Gray16> {
    if !(full_scale.is_finite() && full_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "full scale must be positive, got {full_scale}"
        )));
    }
    let mut data = vec![0u16; img.values.len()];
    let width = img.width as usize;
    par::for_each_chunk_mut(&mut data, width, |y, row| {
        let src = &img.values[y * width..(y + 1) * width];
        for (d, &v) in row.iter_mut().zip(src) {
            *d = quantize_value14(v, full_scale);
        }
    });
    Gray16::new(img.width, img.height, data)
}

/// Sidecar text describing one corrected frame.
pub fn format_sidecar(img: &PhotonImage, full_scale: f64) -> String {
    format!(
        "width = {}\nheight = {}\nbayer = {}\nfull_scale = {:?}\nclamped_low = {}\nclamped_high = {}\ndefect_fallback = {}\n",
        img.width,
        img.height,
        img.pattern,
        full_scale,
        img.stats.clamped_low,
        img.stats.clamped_high,
        img.stats.fallback
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::build_calibration;
    use crate::spectra::PhotonTable;
    use proptest::prelude::*;

    const KNOTS: [f64; 8] = [100.0, 200.0, 350.0, 500.0, 900.0, 1500.0, 2500.0, 3800.0];
    const PHOTONS: [f64; 8] = [0.0, 10.0, 25.0, 40.0, 80.0, 140.0, 240.0, 370.0];

    #[test]
    fn exact_at_knots() {
        for k in 0..8 {
            assert_eq!(correct_pixel(&KNOTS, &PHOTONS, KNOTS[k]), PHOTONS[k]);
        }
    }

    #[test]
    fn midpoint_and_clamps() {
        assert_eq!(correct_pixel(&KNOTS, &PHOTONS, 150.0), 5.0);
        assert_eq!(correct_pixel(&KNOTS, &PHOTONS, 4095.0), PHOTONS[7]);
        assert_eq!(correct_pixel(&KNOTS, &PHOTONS, 0.0), 0.0);
        assert_eq!(correct_pixel(&KNOTS, &PHOTONS, -3.0), 0.0);
    }

    #[test]
    fn flat_photon_segment_is_constant() {
        let photons = [0.0, 10.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
        assert_eq!(correct_pixel(&KNOTS, &photons, 275.0), 10.0);
    }

    proptest! {
        #[test]
        fn correction_is_monotone(a in 0.0f64..4095.0, b in 0.0f64..4095.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(correct_pixel(&KNOTS, &PHOTONS, lo) <= correct_pixel(&KNOTS, &PHOTONS, hi));
        }

        #[test]
        fn quantize_preserves_order(mut v in prop::collection::vec(-10.0f64..1200.0, 1..200)) {
            let codes: Vec<u16> = v.iter().map(|&x| quantize_value14(x, 1000.0)).collect();
            let mut pairs: Vec<(f64, u16)> = v.drain(..).zip(codes).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn quantize_endpoints() {
        assert_eq!(quantize_value14(1000.0, 1000.0), 16383);
        assert_eq!(quantize_value14(500.0, 1000.0), 8192);
        assert_eq!(quantize_value14(0.0, 1000.0), 0);
        assert_eq!(quantize_value14(5000.0, 1000.0), 16383);
    }

    fn tiny_map() -> CalibrationMap {
        let row: [f64; 8] = PHOTONS;
        let table = PhotonTable::new([row, row, row, row]).unwrap();
        let levels: Vec<LevelImage> = (0..8)
            .map(|k| LevelImage {
                width: 4,
                height: 2,
                values: (0..8).map(|i| KNOTS[k] + i as f64).collect(),
            })
            .collect();
        build_calibration(&levels, &table, BayerPattern::Rggb).unwrap()
    }

    #[test]
    fn dark_frame_is_zero_photons() {
        let map = tiny_map();
        let raw = RawImage::new(4, 2, 12, BayerPattern::Rggb, (0..8).map(|i| 100 + i).collect()).unwrap();
        let img = correct_image(&map, &raw).unwrap();
        assert!(img.values.iter().all(|&v| v == 0.0));
        assert_eq!(img.stats.clamped_low, 8);
        let q = quantize14(&img, img.full_scale).unwrap();
        assert!(q.data.iter().all(|&c| c == 0));
    }

    #[test]
    fn shape_and_pattern_mismatch() {
        let map = tiny_map();
        let raw = RawImage::new(2, 4, 12, BayerPattern::Rggb, vec![0; 8]).unwrap();
        assert!(matches!(correct_image(&map, &raw), Err(Error::DimensionMismatch(_))));
        let raw = RawImage::new(4, 2, 12, BayerPattern::Bggr, vec![0; 8]).unwrap();
        assert!(matches!(correct_image(&map, &raw), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn quantize_rejects_bad_scale() {
        let map = tiny_map();
        let raw = RawImage::new(4, 2, 12, BayerPattern::Rggb, vec![700; 8]).unwrap();
        let img = correct_image(&map, &raw).unwrap();
        assert!(quantize14(&img, 0.0).is_err());
        assert!(quantize14(&img, f64::NAN).is_err());
        assert_eq!(img.full_scale, 370.0);
    }
}
