//! Sub-commands of `raven-sim`, callable without the argument parser.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use raven_core::config::RunConfig;
use raven_core::dataset::{preprocess, split_audio, Manifest, Split};
use raven_core::fcnn::{self, build_fcnn, baseline_specs, train_sgd};
use raven_core::frontend::{extract, imgfile, load_clip, CompositeImage, FrontendConfig};
use raven_core::pcm::{estimate_energy, read_checkpoint, write_checkpoint, Mode};
use raven_core::rbm::{build_network, evaluate, train, Evaluation, Network, TrainLog};
use raven_core::report::{compare, epoch_error_series, epoch_metrics_csv, sweep_csv, RunReport, SweepCell};
use raven_core::rng::derive_seed;
use raven_core::synth;
use raven_core::{Error, Result};

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::Format(_) => 4,
        Error::Config(_) => 5,
        Error::Contract(_) => 6,
        Error::Parameter(_) => 7,
    }
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

/// Caps the global pool at `RAVEN_SIM_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("RAVEN_SIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| Error::Config(format!("RAVEN_SIM_THREADS={v} is not a count")))?;
    // A pool built earlier in the process (tests) is fine to keep.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_synth(out_dir: &Path, words: &[String], per_class: usize, seed: u64) -> Result<usize> {
    if per_class == 0 {
        return Err(Error::Parameter("need at least one utterance per class".into()));
    }
    let words: Vec<&str> = words.iter().map(String::as_str).collect();
    synth::write_corpus(out_dir, &words, per_class, seed)
}

pub fn cmd_preprocess(audio_dir: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Manifest> {
    create_dir(out_dir)?;
    preprocess(
        audio_dir,
        out_dir,
        &cfg.frontend,
        cfg.run.train_per_class,
        cfg.run.test_per_class,
        cfg.run.seed,
    )
}

/// A manifest plus the directory its paths are relative to.
pub struct Dataset {
    pub classes: Vec<String>,
    pub train: Vec<(Vec<f64>, usize)>,
    pub test: Vec<(Vec<f64>, usize)>,
    pub layout: Vec<(usize, usize)>,
}

/// Keeps the first `budget` examples of each class.
fn cap_per_class(data: Vec<(Vec<f64>, usize)>, n_classes: usize, budget: usize) -> Vec<(Vec<f64>, usize)> {
    let mut seen = vec![0; n_classes];
    data.into_iter()
        .filter(|(_, c)| {
            seen[*c] += 1;
            seen[*c] <= budget
        })
        .collect()
}

pub fn load_dataset(manifest_path: &Path, budget: Option<usize>) -> Result<Dataset> {
    let m = Manifest::read(manifest_path)?;
    if m.records.is_empty() {
        return Err(Error::Format("manifest has no records".into()));
    }
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let classes = m.classes();
    let mut train = m.load(root, Split::Train)?;
    let test = m.load(root, Split::Test)?;
    if let Some(b) = budget {
        if b == 0 {
            return Err(Error::Parameter("budget must be at least one example per class".into()));
        }
        train = cap_per_class(train, classes.len(), b);
    }
    Ok(Dataset {
        classes,
        train,
        test,
        layout: m.records[0].layout.clone(),
    })
}

fn check_layout(cfg: &RunConfig, ds: &Dataset) -> Result<()> {
    let want = cfg.frontend.layout()?;
    if want != ds.layout {
        return Err(Error::Config(format!(
            "manifest images are {} but the configuration expects {}",
            raven_core::frontend::format_layout(&ds.layout),
            cfg.frontend.images
        )));
    }
    Ok(())
}

fn new_network(cfg: &RunConfig, n_classes: usize) -> Result<Network> {
    build_network(
        &cfg.topology,
        n_classes,
        cfg.device.build()?,
        &cfg.lif,
        &cfg.encoding,
        cfg.train.init_scale,
        cfg.run.seed,
    )
}

/// Sidecar written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub classes: Vec<String>,
    pub epochs_completed: usize,
    pub seed: u64,
    pub config: RunConfig,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut p = checkpoint.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

pub fn read_meta(checkpoint: &Path) -> Result<CheckpointMeta> {
    let path = meta_path(checkpoint);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn rbm_report(task: &str, ev: &Evaluation, spikes_train: u64, updates: u64, cfg: &RunConfig, log: Option<&TrainLog>) -> RunReport {
    let (sim_time_s, energy_j) = match log {
        Some(l) => {
            let n = l.presentations.len() as f64;
            let t = n * (cfg.train.t_data_ms + cfg.train.t_model_ms) * 1e-3;
            (t, estimate_energy(t, spikes_train, updates, Mode::Train, &cfg.energy).total_j)
        }
        None => (
            ev.sim_time_s,
            estimate_energy(ev.sim_time_s, ev.total_spikes, 0, Mode::Infer, &cfg.energy).total_j,
        ),
    };
    let n = ev.predictions.len().max(1) as u64;
    RunReport {
        accuracy: ev.accuracy,
        spikes_infer: ev.total_spikes / n,
        spikes_train,
        sim_time_s,
        energy_j,
        per_class_errors: ev.per_class_error.clone(),
        class_sizes: ev.class_sizes.clone(),
        no_spike: ev.no_spike as u64,
        ..RunReport::new(task, "spiking-rbm")
    }
}

pub struct TrainOutcome {
    pub network: Network,
    pub log: TrainLog,
    pub report: RunReport,
}

/// Trains on `ds`, writing the checkpoint, its sidecar, per-epoch metrics
/// and the final report into `out_dir`.
pub fn cmd_train(ds: &Dataset, cfg: &RunConfig, out_dir: &Path, checkpoint: Option<&Path>) -> Result<TrainOutcome> {
    check_layout(cfg, ds)?;
    cfg.topology.validate(ds.classes.len())?;
    create_dir(out_dir)?;
    let mut net = new_network(cfg, ds.classes.len())?;
    let metrics_path = out_dir.join("metrics.csv");
    write(&metrics_path, &epoch_metrics_csv(&[]))?;
    let mut rows = Vec::new();
    let mut csv_err = None;
    let log = train(&mut net, &ds.train, Some(&ds.test), &cfg.train, cfg.run.seed, |m| {
        rows.push(m.clone());
        if let Err(e) = write(&metrics_path, &epoch_metrics_csv(&rows)) {
            csv_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = csv_err {
        return Err(e);
    }
    write(&out_dir.join("epoch_errors.csv"), &epoch_error_series(&log.epochs, &ds.classes))?;
    let ckpt = checkpoint.map_or_else(|| out_dir.join("rbm.rvnw"), Path::to_path_buf);
    write_checkpoint(&ckpt, net.bar.array())?;
    let meta = CheckpointMeta {
        classes: ds.classes.clone(),
        epochs_completed: cfg.train.epochs,
        seed: cfg.run.seed,
        config: cfg.clone(),
    };
    write(&meta_path(&ckpt), &toml::to_string(&meta).expect("metadata serializes"))?;
    let ev = match log.epochs.last().and_then(|m| m.test.clone()) {
        Some(ev) => ev,
        None => evaluate(&net, &ds.test, cfg.train.t_infer_ms, cfg.run.seed)?,
    };
    let report = rbm_report(&ds.classes.join(","), &ev, log.total_spikes(), log.total_updates(), cfg, Some(&log));
    report.validate()?;
    write(&out_dir.join("report.txt"), &report.to_text())?;
    Ok(TrainOutcome { network: net, log, report })
}

pub fn load_network(checkpoint: &Path, cfg: &RunConfig) -> Result<(Network, Vec<String>)> {
    let array = read_checkpoint(checkpoint, &cfg.device)?;
    let classes = read_meta(checkpoint)?.classes;
    let net = Network::from_array(&cfg.topology, classes.len(), &cfg.lif, &cfg.encoding, array)?;
    Ok((net, classes))
}

pub struct InferOutcome {
    pub class: usize,
    pub label: String,
    pub counts: Vec<u64>,
    pub report: RunReport,
}

fn input_image(input: &Path, frontend: &FrontendConfig) -> Result<CompositeImage> {
    let is_wav = input.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav"));
    if is_wav {
        extract(&load_clip(input)?, frontend)
    } else {
        imgfile::read_composite(input, &frontend.layout()?)
    }
}

pub fn cmd_infer(checkpoint: &Path, input: &Path, cfg: &RunConfig) -> Result<InferOutcome> {
    let (net, classes) = load_network(checkpoint, cfg)?;
    let img = input_image(input, &cfg.frontend)?;
    let inf = net.infer(&img.pixels, cfg.train.t_infer_ms, cfg.run.seed)?;
    let spikes = inf.spikes();
    let energy = estimate_energy(inf.sim_time_s, spikes, 0, Mode::Infer, &cfg.energy);
    let report = RunReport {
        accuracy: 0.0,
        spikes_infer: spikes,
        sim_time_s: inf.sim_time_s,
        energy_j: energy.total_j,
        no_spike: u64::from(inf.decision.no_spike),
        ..RunReport::new(&input.display().to_string(), "spiking-rbm")
    };
    Ok(InferOutcome {
        class: inf.class(),
        label: classes.get(inf.class()).cloned().unwrap_or_default(),
        counts: inf.decision.class_counts,
        report,
    })
}

pub fn cmd_evaluate(checkpoint: &Path, ds: &Dataset, cfg: &RunConfig) -> Result<RunReport> {
    check_layout(cfg, ds)?;
    let (net, _) = load_network(checkpoint, cfg)?;
    if net.n_classes != ds.classes.len() {
        return Err(Error::Config(format!(
            "checkpoint knows {} classes, manifest has {}",
            net.n_classes,
            ds.classes.len()
        )));
    }
    let ev = evaluate(&net, &ds.test, cfg.train.t_infer_ms, cfg.run.seed)?;
    let report = rbm_report(&ds.classes.join(","), &ev, 0, 0, cfg, None);
    report.validate()?;
    Ok(report)
}

fn to_grid(pixels: &[f64], layout: &[(usize, usize)]) -> Result<Vec<f64>> {
    let img = CompositeImage {
        pixels: pixels.to_vec(),
        layout: layout.to_vec(),
    };
    Ok(img.to_grid()?.0)
}

pub fn fcnn_report(ds: &Dataset, cfg: &RunConfig) -> Result<(RunReport, u64)> {
    let specs = baseline_specs();
    let grid = |data: &[(Vec<f64>, usize)]| -> Result<Vec<(Vec<f64>, usize)>> {
        data.iter().map(|(x, c)| Ok((to_grid(x, &ds.layout)?, *c))).collect()
    };
    let (train_set, test_set) = (grid(&ds.train)?, grid(&ds.test)?);
    let input = specs[0].input;
    if train_set[0].0.len() != input.w * input.h * input.c {
        return Err(Error::Config(format!(
            "baseline expects {}x{} inputs, manifest images tile to {} pixels",
            input.w,
            input.h,
            train_set[0].0.len()
        )));
    }
    let last = specs.last().expect("non-empty table").output;
    if last.c < ds.classes.len() {
        return Err(Error::Config(format!("baseline has {} outputs for {} classes", last.c, ds.classes.len())));
    }
    let mut net = build_fcnn(&specs, cfg.run.seed)?;
    let log = train_sgd(&mut net, &train_set, cfg.fcnn.learning_rate, cfg.fcnn.epochs, cfg.run.seed)?;
    let preds: Vec<usize> = test_set.par_iter().map(|(x, _)| net.predict(x)).collect::<Result<_>>()?;
    let n = ds.classes.len();
    let mut sizes = vec![0u64; n];
    let mut wrong = vec![0u64; n];
    for ((_, c), p) in test_set.iter().zip(&preds) {
        sizes[*c] += 1;
        wrong[*c] += u64::from(p != c);
    }
    let accuracy = fcnn::accuracy(&net, &test_set)?;
    let report = RunReport {
        accuracy,
        macs_infer: log.macs.total_forward,
        macs_train: log.macs.total_training,
        per_class_errors: wrong.iter().zip(&sizes).map(|(&w, &s)| if s == 0 { 0.0 } else { w as f64 / s as f64 }).collect(),
        class_sizes: sizes,
        ..RunReport::new(&ds.classes.join(","), "fcnn")
    };
    report.validate()?;
    Ok((report, log.macs.total_training_2x))
}

/// Trains both models at the configured budget and returns the
/// key-value comparison block.
pub fn cmd_compare(ds: &Dataset, cfg: &RunConfig, out_dir: &Path) -> Result<String> {
    let rbm = cmd_train(ds, cfg, &out_dir.join("rbm"), None)?;
    let (fcnn, macs_train_2x) = fcnn_report(ds, cfg)?;
    let cmp = compare(&rbm.report, &fcnn);
    let mut text = cmp.to_text();
    let _ = writeln!(text, "\n[fcnn_training_convention]");
    let _ = writeln!(text, "backward_as_two_forwards = {}", fcnn.macs_train);
    let _ = writeln!(text, "backward_as_one_forward = {macs_train_2x}");
    create_dir(out_dir)?;
    write(&out_dir.join("comparison.txt"), &text)?;
    Ok(text)
}

/// Error-rate grid over single-image sizes. Infeasible sizes are marked
/// skipped; each cell trains with its own derived seed.
pub fn cmd_sweep(audio_dir: &Path, widths: &[usize], heights: &[usize], budget: usize, cfg: &RunConfig, out_dir: &Path) -> Result<String> {
    if budget == 0 {
        return Err(Error::Parameter("budget must be at least one example per class".into()));
    }
    let files = split_audio(audio_dir, budget, cfg.run.test_per_class, cfg.run.seed)?;
    let mut classes: Vec<String> = files.iter().map(|f| f.label.clone()).collect();
    classes.dedup();
    let clips = files
        .par_iter()
        .map(|f| {
            let class = classes.binary_search(&f.label).expect("own label");
            Ok((load_clip(&f.wav)?, class, f.split))
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = widths.iter().flat_map(|&w| heights.iter().map(move |&h| (w, h))).collect();
    let results: Vec<SweepCell> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(w, h))| {
            let mut c = cfg.clone();
            c.frontend = FrontendConfig { images: format!("{w}x{h}"), ..cfg.frontend.clone() };
            c.topology.n_image = w * h;
            c.run.seed = derive_seed(cfg.run.seed, &[k as u64]);
            match sweep_cell(&c, &clips, classes.len()) {
                Ok(err) => SweepCell::Error(err),
                Err(e) => SweepCell::Skipped(e.to_string()),
            }
        })
        .collect();
    let rows: Vec<Vec<SweepCell>> = results.chunks(heights.len().max(1)).map(<[SweepCell]>::to_vec).collect();
    let csv = sweep_csv(widths, heights, &rows);
    create_dir(out_dir)?;
    write(&out_dir.join("sweep.csv"), &csv)?;
    let mut meta = format!(
        "reduced_budget = true\ntrain_per_class = {budget}\ntest_per_class = {}\nepochs = {}\nseed = {}\n",
        cfg.run.test_per_class, cfg.train.epochs, cfg.run.seed
    );
    for ((w, h), cell) in cells.iter().zip(&results) {
        if let SweepCell::Skipped(why) = cell {
            let _ = writeln!(meta, "skipped_{w}x{h} = \"{}\"", why.replace('"', "'"));
        }
    }
    write(&out_dir.join("sweep_meta.txt"), &meta)?;
    Ok(csv)
}

fn sweep_cell(cfg: &RunConfig, clips: &[(raven_core::frontend::AudioClip, usize, Split)], n_classes: usize) -> Result<f64> {
    cfg.validate()?;
    let mut train_set = Vec::new();
    let mut test_set = Vec::new();
    for (clip, c, s) in clips {
        let x = extract(clip, &cfg.frontend)?.pixels;
        match s {
            Split::Train => train_set.push((x, *c)),
            Split::Test => test_set.push((x, *c)),
        }
    }
    let mut net = new_network(cfg, n_classes)?;
    let log = train(&mut net, &train_set, Some(&test_set), &cfg.train, cfg.run.seed, |_| {})?;
    let err = match log.epochs.last().and_then(|m| m.test_error()) {
        Some(e) => e,
        None => 1.0 - evaluate(&net, &test_set, cfg.train.t_infer_ms, cfg.run.seed)?.accuracy,
    };
    Ok(err)
}
