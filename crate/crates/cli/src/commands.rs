use std::io::Write;
use std::path::{Path, PathBuf};

use radiocal::calibration::{self, mean_level_image, save_calibration_to};
use radiocal::correction::{self, quantize14};
use radiocal::image::{read_png, read_raw, write_png16_to, write_png8_to, write_raw_to};
use radiocal::lil::{self, Layout};
use radiocal::pie::{focus_profile, format_profile, select_focus};
use radiocal::spectra::{self, load_qe_table, load_spectrum, photon_counts, QeSet, Spectrum, LEVEL_COUNT};
use radiocal::synth::{self, SensorModel, SyntheticOptics, VignetteSpec};
use radiocal::{build_calibration, correct_image, load_calibration, par, IntImage, RawImage, RenyiParams};

use crate::cli::{CalibrateArgs, Command, CorrectArgs, InspectArgs, LilArgs, PieArgs, SceneKind, SynthArgs};
use crate::error::{CliError, WithPath};
use crate::fsio::{self, create_dir, expand_inputs, require_exists, stem, write_atomic, write_text};

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Inspect(a) => inspect(&a),
        Command::Pie(a) => pie(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::Correct(a) => correct(&a),
        Command::Lil(a) => lil_cmd(&a),
        Command::Synth(a) => synth_cmd(&a),
    }
}

fn read_frames(paths: &[PathBuf]) -> Result<Vec<RawImage>> {
    par::try_map(paths, |p| read_raw(p).at(p))
}

fn write_raw_file(path: &Path, img: &RawImage) -> Result<()> {
    write_atomic(path, |w| write_raw_to(img, w).at(path))
}

fn inspect(args: &InspectArgs) -> Result<()> {
    let path = &args.path;
    require_exists([path])?;
    let mut out = String::new();
    if fsio::is_ncal(path) {
        let map = load_calibration(path).at(path)?;
        out.push_str(&format!(
            "format ncal\nwidth {}\nheight {}\nbayer {} (code {})\ndefective_pixels {}\n",
            map.width(),
            map.height(),
            map.pattern(),
            map.pattern().code(),
            map.defect_count()
        ));
        for (k, v) in map.metadata() {
            out.push_str(&format!("meta {k} = {v}\n"));
        }
    } else if fsio::is_png(path) {
        let img = read_png(path).at(path)?;
        let mut seen = vec![false; 1 << 16];
        for &v in &img.data {
            seen[v as usize] = true;
        }
        out.push_str(&format!(
            "format png\nwidth {}\nheight {}\nchannels {}\nbit_depth {}\noccupied_levels {}\n",
            img.width,
            img.height,
            img.channels,
            img.bit_depth,
            seen.iter().filter(|&&s| s).count()
        ));
    } else {
        let img = read_raw(path).at(path)?;
        out.push_str(&format!(
            "format nraw\nwidth {}\nheight {}\nbit_depth {}\nbayer {} (code {})\noccupied_levels {}\n",
            img.width(),
            img.height(),
            img.bit_depth(),
            img.pattern(),
            img.pattern().code(),
            img.occupied_levels()
        ));
    }
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(out.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

fn pie(args: &PieArgs) -> Result<()> {
    let params = RenyiParams::new(args.pie.alpha)?;
    let paths = expand_inputs(&args.inputs, &["nraw"])?;
    let frames = read_frames(&paths)?;
    let profile = focus_profile(&frames, &params, args.pie.weighting)?;
    let selected = select_focus(&profile, args.pie.rule)?;
    let z: Option<Vec<f64>> = args.z_start.map(|start| {
        let step = args.z_step.unwrap_or(1.0);
        (0..frames.len()).map(|i| start + step * i as f64).collect()
    });
    log::info!("{} frames, selected {selected}", frames.len());
    write_text(&args.output, &format_profile(&profile, z.as_deref(), selected))
}

fn load_qe(args: &CalibrateArgs) -> Result<QeSet> {
    if let Some(path) = &args.qe {
        return load_qe_table(path).at(path);
    }
    let files = [&args.qe_r, &args.qe_g1, &args.qe_g2, &args.qe_b];
    let curves = files
        .iter()
        .map(|p| {
            let p = p.as_ref().ok_or_else(|| CliError::Validation("four QE files are required".into()))?;
            let s = load_spectrum(p).at(p)?;
            Spectrum::efficiency(s.wavelengths().to_vec(), s.values().to_vec()).at(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let [r, g1, g2, b]: [Spectrum; 4] = curves.try_into().expect("four curves");
    Ok(QeSet::new(r, g1, g2, b))
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    if args.levels.len() != LEVEL_COUNT || args.level_spectra.len() != LEVEL_COUNT - 1 {
        return Err(CliError::Validation(format!(
            "expected {LEVEL_COUNT} level stacks and {} level spectra, got {} and {}",
            LEVEL_COUNT - 1,
            args.levels.len(),
            args.level_spectra.len()
        )));
    }
    require_exists(args.levels.iter().chain(&args.level_spectra))?;
    require_exists([&args.qe, &args.qe_r, &args.qe_g1, &args.qe_g2, &args.qe_b].into_iter().flatten())?;
    let params = RenyiParams::new(args.pie.alpha)?;

    let spectra = args
        .level_spectra
        .iter()
        .map(|p| load_spectrum(p).at(p))
        .collect::<Result<Vec<_>>>()?;
    let qe = load_qe(args)?;
    let table = photon_counts(&spectra, &qe)?;

    let mut means = Vec::with_capacity(LEVEL_COUNT);
    let mut focus = Vec::with_capacity(LEVEL_COUNT);
    let mut pattern = None;
    for (k, input) in args.levels.iter().enumerate() {
        let paths = expand_inputs(std::slice::from_ref(input), &["nraw"])?;
        let frames = read_frames(&paths)?;
        let p = frames[0].pattern();
        if frames.iter().any(|f| f.pattern() != p) || pattern.is_some_and(|q| q != p) {
            return Err(CliError::Validation(format!(
                "level stacks disagree on the Bayer pattern ({})",
                input.display()
            )));
        }
        pattern = Some(p);
        let index = if frames.len() == 1 {
            0
        } else {
            let profile = focus_profile(&frames, &params, args.pie.weighting)?;
            select_focus(&profile, args.pie.rule)?
        };
        log::info!("L{k}: {} frame(s), focus frame {index}", frames.len());
        means.push(mean_level_image(&frames, index, args.half_window).at(input)?);
        focus.push(index);
    }

    let mut map = build_calibration(&means, &table, pattern.expect("eight stacks"))?;
    let meta = map.metadata_mut();
    meta.insert("levels".into(), join_paths(&args.levels));
    meta.insert("level_spectra".into(), join_paths(&args.level_spectra));
    let qe_paths: Vec<PathBuf> = [&args.qe, &args.qe_r, &args.qe_g1, &args.qe_g2, &args.qe_b]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    meta.insert("qe".into(), join_paths(&qe_paths));
    meta.insert(
        "focus_frames".into(),
        focus.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    meta.insert("alpha".into(), format!("{}", args.pie.alpha));
    meta.insert("weighting".into(), args.pie.weighting.to_string());
    meta.insert("rule".into(), args.pie.rule.to_string());
    meta.insert("half_window".into(), args.half_window.to_string());

    write_atomic(&args.output, |w| save_calibration_to(&map, w).at(&args.output))?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| args.output.with_extension("report.txt"));
    write_text(&report_path, &calibration::format_report(&map))?;
    log::info!(
        "{} defective pixel(s), wrote {}",
        map.defect_count(),
        args.output.display()
    );
    Ok(())
}

fn correct(args: &CorrectArgs) -> Result<()> {
    require_exists(std::iter::once(&args.calibration).chain(&args.inputs))?;
    if let Some(fs) = args.full_scale {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(CliError::Validation(format!("full scale must be positive, got {fs}")));
        }
    }
    let paths = expand_inputs(&args.inputs, &["nraw"])?;
    let map = load_calibration(&args.calibration).at(&args.calibration)?;
    let full_scale = args.full_scale.unwrap_or_else(|| map.photon_table().max_full_level());
    create_dir(&args.output_dir)?;
    for path in &paths {
        let raw = read_raw(path).at(path)?;
        let photons = correct_image(&map, &raw).at(path)?;
        drop(raw);
        let code = quantize14(&photons, full_scale)?;
        let name = stem(path);
        let png = args.output_dir.join(format!("{name}.png"));
        write_atomic(&png, |w| write_png16_to(&code, w).at(&png))?;
        write_text(
            &args.output_dir.join(format!("{name}.txt")),
            &correction::format_sidecar(&photons, full_scale),
        )?;
        log::info!("{} -> {}", path.display(), png.display());
    }
    Ok(())
}

fn load_int_image(path: &Path, args: &LilArgs) -> Result<IntImage> {
    if fsio::is_png(path) {
        let png = read_png(path).at(path)?;
        let img = IntImage::from_png(png, args.bayer).at(path)?;
        match args.bit_depth {
            Some(d) => IntImage::new(img.width, img.height, img.layout, d, img.data).at(path),
            None => Ok(img),
        }
    } else {
        let raw = read_raw(path).at(path)?;
        let mut img = IntImage::from_raw(&raw);
        if let Some(p) = args.bayer {
            if p != raw.pattern() {
                log::warn!("{}: overriding stored pattern {} with {p}", path.display(), raw.pattern());
                img.layout = Layout::Mosaic(p);
            }
        }
        Ok(img)
    }
}

fn write_png8(path: &Path, width: u32, height: u32, channels: usize, data: &[u8]) -> Result<()> {
    write_atomic(path, |w| write_png8_to(width, height, channels, data, w).at(path))
}

fn lil_cmd(args: &LilArgs) -> Result<()> {
    let paths = expand_inputs(&args.inputs, &["nraw", "png"])?;
    let images = par::try_map(&paths, |p| load_int_image(p, args))?;
    let out = lil::lil_convert(&images, args.mode, args.scope, args.crop.as_ref())?;
    drop(images);
    create_dir(&args.output_dir)?;
    let names: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    let jobs: Vec<usize> = (0..names.len()).collect();
    par::try_map(&jobs, |&i| -> Result<()> {
        let img = &out.images[i];
        let name = &names[i];
        let channels = img.layout.channels();
        write_png8(
            &args.output_dir.join(format!("{name}.png")),
            img.width,
            img.height,
            channels,
            &img.data,
        )?;
        if args.planes {
            if let Layout::Mosaic(_) = img.layout {
                let planes = img.planes()?;
                for (ch, plane) in radiocal::Channel::ALL.iter().zip(&planes) {
                    write_png8(
                        &args.output_dir.join(format!("{name}_{ch}.png")),
                        plane.width,
                        plane.height,
                        1,
                        &plane.data,
                    )?;
                }
            } else {
                log::warn!("{name}: --planes applies to mosaic input only");
            }
        }
        Ok(())
    })?;
    write_text(
        &args.output_dir.join("lil_report.txt"),
        &lil::format_report(&out, &names, args.mode, args.scope),
    )
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let spec = VignetteSpec {
        gain_center: 1.0,
        gain_corner: args.vignette,
        jitter: args.jitter,
        offset_max: args.offset_max,
        defect_fraction: args.defect_fraction,
    };
    let model = SensorModel::vignetted(args.width, args.height, args.bayer, 12, args.seed, &spec)?;
    let optics = SyntheticOptics::new(args.full_level)?;
    let table = &optics.table;
    let dir = &args.output_dir;
    create_dir(dir)?;
    create_dir(&dir.join("spectra"))?;
    create_dir(&dir.join("scene"))?;

    let stack = synth::render_stack(&model, table)?;
    for (k, img) in stack.iter().enumerate() {
        write_raw_file(&dir.join(format!("L{k}.nraw")), img)?;
    }
    drop(stack);
    for (k, s) in optics.levels.iter().enumerate() {
        write_text(
            &dir.join("spectra").join(format!("L{}.txt", k + 1)),
            &spectra::format_spectrum(s),
        )?;
    }
    write_text(&dir.join("qe.txt"), &spectra::format_qe_table(&optics.qe)?)?;

    let frames: Vec<u32> = (0..args.frames).collect();
    par::try_map(&frames, |&f| -> Result<()> {
        let img = match args.scene {
            SceneKind::Flat => synth::render_level(
                &model,
                radiocal::Channel::ALL.map(|ch| 0.6 * table.get(ch, LEVEL_COUNT - 1)),
            )?,
            SceneKind::Texture => {
                let field = synth::textured_scene(args.width, args.height, args.bayer, table, f);
                synth::render_field(&model, &field)?
            }
        };
        write_raw_file(&dir.join("scene").join(format!("frame_{f:04}.nraw")), &img)
    })?;

    let scene = match args.scene {
        SceneKind::Flat => "flat",
        SceneKind::Texture => "texture",
    };
    let extra = [
        ("scene".to_string(), scene.to_string()),
        ("frames".to_string(), args.frames.to_string()),
        ("full_level".to_string(), format!("{:?}", args.full_level)),
        ("vignette_corner".to_string(), format!("{:?}", args.vignette)),
        ("jitter".to_string(), format!("{:?}", args.jitter)),
        ("defect_fraction".to_string(), format!("{:?}", args.defect_fraction)),
    ];
    write_text(&dir.join("ground_truth.txt"), &synth::format_ground_truth(&model, table, &extra))?;
    log::info!("wrote synthetic fixture to {}", dir.display());
    Ok(())
}
