#![cfg(feature = "parallel")]

use radiocal::calibration::{build_calibration, save_calibration_to, LevelImage};
use radiocal::correction::{correct_image, quantize14};
use radiocal::lil::{lil_convert, GroupMode, IntImage, Scope};
use radiocal::pie::{focus_profile, RenyiParams, Weighting};
use radiocal::synth::{render_field, render_stack, textured_scene, SensorModel, SyntheticOptics, VignetteSpec};
use radiocal::BayerPattern;

/// Everything the pipeline produces for a small series, as bytes.
fn run_pipeline() -> Vec<Vec<u8>> {
    let spec = VignetteSpec {
        defect_fraction: 0.02,
        ..VignetteSpec::default()
    };
    let model = SensorModel::vignetted(192, 128, BayerPattern::Grbg, 12, 99, &spec).unwrap();
    let optics = SyntheticOptics::new(3500.0).unwrap();
    let stack = render_stack(&model, &optics.table).unwrap();
    let means: Vec<LevelImage> = stack.iter().map(LevelImage::from_raw).collect();
    let map = build_calibration(&means, &optics.table, BayerPattern::Grbg).unwrap();
    let mut out = Vec::new();
    let mut ncal = Vec::new();
    save_calibration_to(&map, &mut ncal).unwrap();
    out.push(ncal);

    let frames: Vec<_> = (0..6)
        .map(|f| render_field(&model, &textured_scene(192, 128, BayerPattern::Grbg, &optics.table, f)).unwrap())
        .collect();
    let profile = focus_profile(&frames, &RenyiParams::default(), Weighting::Occurrence).unwrap();
    out.push(profile.values.iter().flatten().flat_map(|v| v.to_le_bytes()).collect());

    let mut codes = Vec::new();
    for f in &frames {
        let photons = correct_image(&map, f).unwrap();
        out.push(photons.values.iter().flat_map(|v| v.to_le_bytes()).collect());
        let q = quantize14(&photons, photons.full_scale).unwrap();
        out.push(q.data.iter().flat_map(|v| v.to_le_bytes()).collect());
        codes.push(IntImage::new(q.width, q.height, radiocal::lil::Layout::Mosaic(BayerPattern::Grbg), 14, q.data).unwrap());
    }
    for scope in [Scope::Single, Scope::Series] {
        let lil = lil_convert(&codes, GroupMode::PerChannel, scope, None).unwrap();
        out.extend(lil.images.into_iter().map(|i| i.data));
    }
    out
}

fn with_workers<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

#[test]
fn identical_bytes_for_any_worker_count() {
    let one = with_workers(1, run_pipeline);
    for n in [2, 3, 8] {
        let many = with_workers(n, run_pipeline);
        assert_eq!(one.len(), many.len());
        for (i, (a, b)) in one.iter().zip(&many).enumerate() {
            assert!(a == b, "output {i} differs at {n} workers");
        }
    }
}

#[test]
fn same_seed_same_sensor() {
    let spec = VignetteSpec::default();
    let a = with_workers(1, || SensorModel::vignetted(64, 48, BayerPattern::Rggb, 12, 5, &spec).unwrap());
    let b = with_workers(4, || SensorModel::vignetted(64, 48, BayerPattern::Rggb, 12, 5, &spec).unwrap());
    assert_eq!(a, b);
    let c = SensorModel::vignetted(64, 48, BayerPattern::Rggb, 12, 6, &spec).unwrap();
    assert_ne!(a.offset, c.offset);
}
