use radiocal::calibration::{build_calibration, mean_level_image, LevelImage};
use radiocal::correction::{correct_image, correct_level_image, quantize14};
use radiocal::spectra::LEVEL_COUNT;
use radiocal::synth::{render_field, render_level, render_stack, textured_scene, SensorModel, SyntheticOptics, VignetteSpec};
use radiocal::{BayerPattern, Channel, RawImage};

fn fixture(w: u32, h: u32, pattern: BayerPattern, defect_fraction: f64, seed: u64) -> (SensorModel, SyntheticOptics) {
    let spec = VignetteSpec {
        defect_fraction,
        ..VignetteSpec::default()
    };
    (
        SensorModel::vignetted(w, h, pattern, 12, seed, &spec).unwrap(),
        SyntheticOptics::new(3500.0).unwrap(),
    )
}

fn levels_of(stack: &[RawImage]) -> Vec<LevelImage> {
    stack.iter().map(LevelImage::from_raw).collect()
}

#[test]
fn knot_exactness_with_defects() {
    for pattern in [BayerPattern::Rggb, BayerPattern::Gbrg] {
        let (model, optics) = fixture(256, 256, pattern, 0.01, 21);
        let stack = render_stack(&model, &optics.table).unwrap();
        // three identical frames per level, averaged around the middle one
        let means: Vec<LevelImage> = stack
            .iter()
            .map(|f| mean_level_image(&[f.clone(), f.clone(), f.clone()], 1, 1).unwrap())
            .collect();
        let map = build_calibration(&means, &optics.table, pattern).unwrap();
        assert!(map.defect_count() >= model.defects.len());
        for (k, mean) in means.iter().enumerate() {
            let img = correct_level_image(&map, mean).unwrap();
            for (i, &v) in img.values.iter().enumerate() {
                if map.is_defective(i) {
                    continue;
                }
                let want = optics.table.get(model.channel_at(i), k);
                assert!(
                    (v - want).abs() <= 1e-9 * want.abs(),
                    "L{k} pixel {i}: {v} vs {want}"
                );
            }
        }
    }
}

#[test]
fn closure_within_one_count() {
    let (model, optics) = fixture(96, 80, BayerPattern::Bggr, 0.0, 3);
    let stack = render_stack(&model, &optics.table).unwrap();
    let map = build_calibration(&levels_of(&stack), &optics.table, BayerPattern::Bggr).unwrap();
    let mut worst = 0.0f64;
    for frame in 0..4 {
        let truth = textured_scene(96, 80, BayerPattern::Bggr, &optics.table, frame);
        let raw = render_field(&model, &truth).unwrap();
        let out = correct_image(&map, &raw).unwrap();
        for (i, (&p, &t)) in out.values.iter().zip(&truth).enumerate() {
            // error expressed in digital counts of this pixel
            worst = worst.max((p - t).abs() * model.gain[i]);
        }
    }
    // half a count from the sample plus up to half a count from each knot
    assert!(worst <= 1.0, "worst error {worst} counts");
}

#[test]
fn flat_field_is_recovered() {
    let (model, optics) = fixture(256, 192, BayerPattern::Rggb, 0.0, 8);
    let stack = render_stack(&model, &optics.table).unwrap();
    let map = build_calibration(&levels_of(&stack), &optics.table, BayerPattern::Rggb).unwrap();
    for fraction in [0.3, 0.6, 0.9] {
        let photons = Channel::ALL.map(|ch| fraction * optics.table.get(ch, LEVEL_COUNT - 1));
        let raw = render_level(&model, photons).unwrap();
        let out = correct_image(&map, &raw).unwrap();
        for ch in Channel::ALL {
            let vals: Vec<f64> = (0..out.values.len())
                .filter(|&i| model.channel_at(i) == ch)
                .map(|i| out.values[i])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            let rsd = var.sqrt() / mean;
            assert!(rsd < 1e-3, "{ch} at {fraction}: rsd {rsd}");
            assert!((mean - photons[ch.index()]).abs() < 1e-3 * photons[ch.index()]);
        }
    }
}

#[test]
fn corrected_histogram_is_wider() {
    let (model, optics) = fixture(256, 256, BayerPattern::Rggb, 0.0, 4);
    let stack = render_stack(&model, &optics.table).unwrap();
    let map = build_calibration(&levels_of(&stack), &optics.table, BayerPattern::Rggb).unwrap();
    let truth = textured_scene(256, 256, BayerPattern::Rggb, &optics.table, 0);
    let raw = render_field(&model, &truth).unwrap();
    let out = correct_image(&map, &raw).unwrap();
    let code = quantize14(&out, out.full_scale).unwrap();
    let mut seen = vec![false; 1 << 14];
    code.data.iter().for_each(|&c| seen[c as usize] = true);
    let corrected = seen.iter().filter(|&&s| s).count();
    assert!(corrected > raw.occupied_levels(), "{corrected} vs {}", raw.occupied_levels());
}

#[test]
fn dark_and_saturated_frames_clamp() {
    let (model, optics) = fixture(64, 64, BayerPattern::Grbg, 0.0, 1);
    let stack = render_stack(&model, &optics.table).unwrap();
    let map = build_calibration(&levels_of(&stack), &optics.table, BayerPattern::Grbg).unwrap();
    let out = correct_image(&map, &stack[0]).unwrap();
    assert!(out.values.iter().all(|&v| v == 0.0));
    let bright = RawImage::new(64, 64, 12, BayerPattern::Grbg, vec![4095; 64 * 64]).unwrap();
    let out = correct_image(&map, &bright).unwrap();
    for (i, &v) in out.values.iter().enumerate() {
        assert_eq!(v, optics.table.get(model.channel_at(i), LEVEL_COUNT - 1));
    }
    assert_eq!(out.stats.clamped_high, 64 * 64);
}
