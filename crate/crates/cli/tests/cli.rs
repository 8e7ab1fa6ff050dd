use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radiocal::image::{read_png, read_png16, read_raw};
use radiocal::lil::{lil_convert, GroupMode, IntImage, Scope};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radiocal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn radiocal")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--output-dir", s(dir), "--width", "64", "--height", "48", "--frames", "3"];
    args.extend_from_slice(extra);
    ok(&args);
}

fn level_args(dir: &Path) -> (String, String) {
    let levels: Vec<String> = (0..8).map(|k| dir.join(format!("L{k}.nraw")).display().to_string()).collect();
    let spectra: Vec<String> = (1..8)
        .map(|k| dir.join("spectra").join(format!("L{k}.txt")).display().to_string())
        .collect();
    (levels.join(","), spectra.join(","))
}

fn calibrate(dir: &Path) -> PathBuf {
    let (levels, spectra) = level_args(dir);
    let cal = dir.join("cal.ncal");
    ok(&[
        "calibrate",
        "--levels",
        &levels,
        "--level-spectra",
        &spectra,
        "--qe",
        s(&dir.join("qe.txt")),
        "--output",
        s(&cal),
    ]);
    cal
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn unknown_flag_exits_2() {
    let out = run(&["inspect", "--nope", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn workers_must_be_positive() {
    let out = run(&["--workers", "0", "inspect", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn errors_are_single_categorized_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["inspect", s(&dir.path().join("missing.nraw"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[validation]: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let bad = dir.path().join("bad.nraw");
    fs::write(&bad, b"NRAW\x01\x02").unwrap();
    let out = run(&["inspect", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[format]: "), "{err}");
}

#[test]
fn inspect_reports_metadata() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--bayer", "GBRG"]);
    let out = ok(&["inspect", s(&dir.path().join("L7.nraw"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    let raw = read_raw(dir.path().join("L7.nraw")).unwrap();
    assert!(text.contains("width 64\n"));
    assert!(text.contains("height 48\n"));
    assert!(text.contains("bit_depth 12\n"));
    assert!(text.contains("bayer GBRG (code 2)\n"));
    assert!(text.contains(&format!("occupied_levels {}\n", raw.occupied_levels())));
}

#[test]
fn calibrate_correct_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &["--defect-fraction", "0.01"]);
    let cal = calibrate(d);
    let report = fs::read_to_string(d.join("cal.report.txt")).unwrap();
    assert!(report.contains("defective_pixels"));
    assert!(report.contains("focus_frames = 0,0,0,0,0,0,0,0"));
    let out = ok(&["inspect", s(&cal)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("format ncal"));

    let outdir = d.join("corrected");
    ok(&["correct", "--calibration", s(&cal), s(&d.join("scene")), "--output-dir", s(&outdir)]);
    let names: Vec<String> = tree(&outdir).into_iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        ["frame_0000.png", "frame_0000.txt", "frame_0001.png", "frame_0001.txt", "frame_0002.png", "frame_0002.txt"]
    );
    let png = read_png16(outdir.join("frame_0001.png")).unwrap();
    assert_eq!((png.width, png.height), (64, 48));
    assert!(png.data.iter().all(|&c| c <= 16383));
    let sidecar = fs::read_to_string(outdir.join("frame_0001.txt")).unwrap();
    for key in ["full_scale", "clamped_low", "clamped_high", "defect_fallback"] {
        assert!(sidecar.contains(key), "{sidecar}");
    }
}

#[test]
fn mismatched_frame_is_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let cal = calibrate(d);
    let other = d.join("other");
    ok(&["synth", "--output-dir", s(&other), "--width", "32", "--height", "32"]);
    let out = run(&[
        "correct",
        "--calibration",
        s(&cal),
        s(&other.join("scene").join("frame_0000.nraw")),
        "--output-dir",
        s(&d.join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[dimension]: "));
}

#[test]
fn pie_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &["--frames", "5"]);
    let table = d.join("pie.txt");
    ok(&[
        "pie",
        s(&d.join("scene")),
        "--output",
        s(&table),
        "--z-start",
        "10",
        "--z-step",
        "0.5",
        "--weighting",
        "occurrence",
    ]);
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[2].starts_with("2 11 "));
    assert!(text.lines().last().unwrap().starts_with("# selected "));
}

#[test]
fn lil_series_is_deterministic_and_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let scene = d.join("scene");
    let a = d.join("a");
    let b = d.join("b");
    ok(&["--workers", "1", "lil", "--scope", "series", s(&scene), "--output-dir", s(&a), "--planes"]);
    ok(&["--workers", "3", "lil", "--scope", "series", s(&scene), "--output-dir", s(&b), "--planes"]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 3 * 5 + 1);
    assert!(ta == tb, "outputs differ between worker counts");

    let frames: Vec<IntImage> = (0..3)
        .map(|f| IntImage::from_raw(&read_raw(scene.join(format!("frame_{f:04}.nraw"))).unwrap()))
        .collect();
    let want = lil_convert(&frames, GroupMode::PerChannel, Scope::Series, None).unwrap();
    for (f, img) in want.images.iter().enumerate() {
        let png = read_png(a.join(format!("frame_{f:04}.png"))).unwrap();
        assert_eq!((png.channels, png.bit_depth), (1, 8));
        assert!(png.data.iter().map(|&v| v as u8).eq(img.data.iter().copied()));
    }
    let report = fs::read_to_string(a.join("lil_report.txt")).unwrap();
    let counts: Vec<String> = want.level_sets[0].counts().iter().map(|c| c.to_string()).collect();
    assert!(report.contains(&format!("series {}\n", counts.join(" "))), "{report}");
}

#[test]
fn lil_crop_and_png_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let cal = calibrate(d);
    let corrected = d.join("c");
    ok(&["correct", "--calibration", s(&cal), s(&d.join("scene")), "--output-dir", s(&corrected)]);
    let out = d.join("l");
    ok(&[
        "lil",
        s(&corrected.join("frame_0000.png")),
        "--bayer",
        "RGGB",
        "--bit-depth",
        "14",
        "--crop",
        "1,1,20,10",
        "--mode",
        "joint",
        "--output-dir",
        s(&out),
    ]);
    let png = read_png(out.join("frame_0000.png")).unwrap();
    assert_eq!((png.width, png.height), (20, 10));
    assert_eq!(*png.data.iter().max().unwrap(), 255);
    let report = fs::read_to_string(out.join("lil_report.txt")).unwrap();
    assert!(report.starts_with("# mode joint scope single\n"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let (levels, spectra) = level_args(d);
    let cfg = d.join("campaign.conf");
    fs::write(
        &cfg,
        format!(
            "# calibration campaign\nlevels = {levels}\nlevel_spectra = {spectra}\nqe = {}\noutput = {}\nweighting = occurrence\n",
            d.join("qe.txt").display(),
            d.join("from_config.ncal").display()
        ),
    )
    .unwrap();
    let flagged = d.join("from_flag.ncal");
    ok(&["--config", s(&cfg), "calibrate", "--output", s(&flagged)]);
    assert!(flagged.exists());
    assert!(!d.join("from_config.ncal").exists());
    let report = fs::read_to_string(d.join("from_flag.report.txt")).unwrap();
    assert!(report.contains("weighting = occurrence"));

    let bad = d.join("bad.conf");
    fs::write(&bad, "no equals sign\n").unwrap();
    let out = run(&["--config", s(&bad), "calibrate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]: "));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--workers", "1", "synth", "--output-dir", s(&a), "--seed", "7", "--frames", "2"]);
    ok(&["--workers", "4", "synth", "--output-dir", s(&b), "--seed", "7", "--frames", "2"]);
    assert!(tree(&a) == tree(&b));
    assert!(tree(&a.join("scene")) == tree(&b.join("scene")));
    let truth = fs::read_to_string(a.join("ground_truth.txt")).unwrap();
    assert!(truth.contains("seed = 7"));
}
