use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ild_core::beamform::{BinDiagnostics, BinStatus, Method, StackedFilter};
use ild_core::metrics::ReportRow;
use ild_core::pipeline::{source_signals, NoisePowerRow, Run};
use ild_core::scene::{AtfSet, Scene};
use ild_core::sphere::{DvfTable, SphereParams, FAR_FIELD_DISTANCE};
use ild_core::stft::StftConfig;
use ild_core::{Error, Result};

use crate::manifest::{missing_inputs, resolve_paths, RunManifest, DEFAULT_METHODS};
use crate::wav;

/// Highest frequency the DVF table is defined for.
pub const DVF_MAX_FREQUENCY: f64 = 800.0;

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

fn not_found(what: &str, paths: &[PathBuf]) -> Error {
    let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    Error::Io(io::Error::new(
        io::ErrorKind::NotFound,
        format!("{what}: {}", list.join(", ")),
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let f = File::create(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(BufWriter::new(f))
}

/// `start, start + step, ...` up to and including `stop` (with rounding slack).
fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone)]
pub struct DvfTableArgs {
    pub distances: Vec<f64>,
    pub fmax: f64,
    pub fstep: f64,
    pub az_step: f64,
    pub head_radius: f64,
}

pub fn dvf_table<W: Write>(args: &DvfTableArgs, out: W) -> Result<DvfTable> {
    if !(args.fmax > 0.0) || args.fmax > DVF_MAX_FREQUENCY {
        return Err(Error::Range(format!(
            "--fmax {} Hz outside (0, {DVF_MAX_FREQUENCY}] Hz",
            args.fmax
        )));
    }
    if !(args.fstep > 0.0) || args.fstep > args.fmax {
        return Err(Error::Range(format!("--f-step {} Hz outside (0, fmax]", args.fstep)));
    }
    if !(args.az_step > 0.0 && args.az_step <= 180.0) {
        return Err(Error::Range(format!("--az-step {} deg outside (0, 180]", args.az_step)));
    }
    if let Some(&d) = args.distances.iter().find(|&&d| !(d > args.head_radius)) {
        return Err(Error::Range(format!("distance {d} m is not outside the head")));
    }
    let table = DvfTable::build(
        &SphereParams::with_radius(args.head_radius),
        &grid(args.fstep, args.fmax, args.fstep),
        &grid(-180.0, 180.0, args.az_step),
        &args.distances,
        FAR_FIELD_DISTANCE,
        DVF_MAX_FREQUENCY,
    )?;
    table.write_csv(out)?;
    Ok(table)
}

/// Reads the scene, renders its signals and simulates the mixture.
fn build_run(scene: &Scene, seed: u64) -> Result<Run> {
    let missing = missing_inputs(scene);
    if !missing.is_empty() {
        return Err(not_found("missing input files", &missing));
    }
    let signals = source_signals(scene, |p| wav::read_mono(p, scene.sample_rate))?;
    match &scene.atf_csv {
        Some(path) => {
            let stft = StftConfig::new(scene.sample_rate, scene.fft_size)?;
            let f = File::open(path)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            let atfs = AtfSet::read_csv(f, stft.frequencies(), scene.mic_count())?;
            if atfs.interferer_count() != scene.interferer_count() {
                return Err(Error::Input(format!(
                    "{} holds {} interferers, scene has {}",
                    path.display(),
                    atfs.interferer_count(),
                    scene.interferer_count()
                )));
            }
            Run::new(scene.clone(), atfs, &signals, seed)
        }
        None => Run::from_scene(scene.clone(), &signals, seed),
    }
}

pub fn simulate(config: Option<&Path>, out: &Path, seed: u64) -> Result<RunManifest> {
    let mut scene = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            let mut scene = Scene::from_toml_str(&text)?;
            resolve_paths(&mut scene, path.parent().unwrap_or(Path::new(".")));
            scene
        }
        None => Scene::from_toml_str(DEFAULT_SCENARIO)?,
    };
    scene.validate()?;
    let run = build_run(&scene, seed)?;
    let mix = &run.mixture;

    let mut groups: Vec<(String, &Vec<Vec<f64>>)> = vec![("mixture".into(), &mix.y), ("target".into(), &mix.target)];
    for (i, x) in mix.interferers.iter().enumerate() {
        groups.push((format!("interferer_{}", i + 1), x));
    }
    groups.push(("self_noise".into(), &mix.self_noise));
    let peak = groups
        .iter()
        .flat_map(|(_, chans)| chans.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let wav_scale = if peak > 0.0 { 0.9 / peak } else { 1.0 };

    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for (name, chans) in &groups {
        fs::create_dir_all(out.join(name))?;
        for (j, ch) in chans.iter().enumerate() {
            let rel = PathBuf::from(name).join(format!("mic{}.wav", j + 1));
            wav::write(&out.join(&rel), std::slice::from_ref(ch), scene.sample_rate, wav_scale)?;
            files.push(rel);
        }
    }
    scene = run.scene;
    let manifest = RunManifest {
        config_path: config.map(Path::to_path_buf),
        scene,
        methods: DEFAULT_METHODS.iter().map(|s| s.to_string()).collect(),
        output_dir: out.to_path_buf(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wav_scale,
        files,
    };
    manifest.save(out)?;
    Ok(manifest)
}

pub fn method_dir(out: &Path, method: &str) -> PathBuf {
    out.join("beamform").join(method)
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names.iter().map(|n| n.parse()).collect()
}

fn apply_overrides(manifest: &mut RunManifest, methods: Option<&[String]>, cutoff_hz: Option<f64>) -> Result<()> {
    if let Some(m) = methods {
        parse_methods(m)?;
        manifest.methods = m.to_vec();
    }
    if let Some(f) = cutoff_hz {
        manifest.scene.cutoff_hz = f;
        manifest.scene.validate()?;
    }
    Ok(())
}

/// Per-method summary printed by `beamform`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    pub method: String,
    pub fallback_bins: usize,
    pub failed_bins: usize,
    pub clipped_samples: usize,
}

pub fn beamform(out: &Path, methods: Option<&[String]>, cutoff_hz: Option<f64>) -> Result<Vec<DesignSummary>> {
    let mut manifest = RunManifest::load(out)?;
    apply_overrides(&mut manifest, methods, cutoff_hz)?;
    let run = build_run(&manifest.scene, manifest.seed)?;
    let opts = run.options();
    let mut summaries = Vec::new();
    let mut missing = Vec::new();
    for name in &manifest.methods {
        let method: Method = name.parse()?;
        let dir = method_dir(out, name);
        let result = (|| -> Result<DesignSummary> {
            let design = run.design(method, &opts)?;
            let filter = &design.filter;
            let mut f = create(&dir.join("filter.csv"))?;
            filter.write_csv(&mut f)?;
            f.flush()?;
            if matches!(method, Method::Ild(_)) {
                let mut f = create(&dir.join("diagnostics.csv"))?;
                BinDiagnostics::write_csv(&design.diagnostics, &mut f)?;
                f.flush()?;
            }
            let clipped = wav::write(
                &dir.join("output.wav"),
                &run.output(filter)?,
                manifest.scene.sample_rate,
                manifest.wav_scale,
            )?;
            let count = |pred: fn(BinStatus) -> bool| filter.status.iter().filter(|s| pred(**s)).count();
            Ok(DesignSummary {
                method: name.clone(),
                fallback_bins: count(|s| matches!(s, BinStatus::FallbackRank | BinStatus::FallbackSolver)),
                failed_bins: count(|s| s == BinStatus::Failed),
                clipped_samples: clipped,
            })
        })();
        match result {
            Ok(s) => summaries.push(s),
            Err(e) => {
                eprintln!("{name}: {e}");
                missing.push(dir);
            }
        }
    }
    manifest.save(out)?;
    if !missing.is_empty() {
        return Err(not_found("artifacts not written", &missing));
    }
    Ok(summaries)
}

pub fn evaluate(out: &Path, cutoff_hz: Option<f64>) -> Result<(Vec<ReportRow>, Vec<NoisePowerRow>)> {
    let mut manifest = RunManifest::load(out)?;
    apply_overrides(&mut manifest, None, cutoff_hz)?;
    let missing: Vec<PathBuf> = manifest
        .methods
        .iter()
        .map(|m| method_dir(out, m).join("filter.csv"))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(not_found("beamform outputs missing", &missing));
    }
    let run = build_run(&manifest.scene, manifest.seed)?;
    let cutoff = manifest.scene.cutoff_hz;
    let mut report = Vec::new();
    let mut noise = Vec::new();
    for name in &manifest.methods {
        let method: Method = name.parse()?;
        let filter = StackedFilter::read_csv(File::open(method_dir(out, name).join("filter.csv"))?)?;
        let scaling = run.scaling(method, cutoff)?;
        report.extend(run.evaluate(&filter, &scaling, cutoff)?);
        noise.extend(NoisePowerRow::rows(&run, &filter));
    }
    let mut f = create(&out.join("metrics.csv"))?;
    ReportRow::write_csv(&report, &mut f)?;
    f.flush()?;
    let mut f = create(&out.join("noise_power.csv"))?;
    NoisePowerRow::write_csv(&noise, &mut f)?;
    f.flush()?;
    Ok((report, noise))
}
