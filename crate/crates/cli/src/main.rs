use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use raven_core::report::reference;
use raven_core::Result;
use raven_sim::*;

#[derive(Parser)]
#[command(name = "raven-sim", version, about = "Spiking-RBM-on-PCM speech command simulator")]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic command corpus as `<out-dir>/<word>/NNNN.wav`.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        /// Utterances per word.
        #[arg(long, default_value_t = 150)]
        budget: usize,
        #[arg(long, value_delimiter = ',', default_value = "up,down,left,right")]
        words: Vec<String>,
    },
    /// Convert a `<label>/*.wav` tree into MFCC images and a manifest.
    Preprocess {
        audio_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the spiking RBM.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Training examples per class.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Classify one WAV or image file.
    Infer {
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Test-split accuracy of a checkpoint.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train the RBM and the convolutional baseline and compare costs.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Test error over a grid of single-image sizes.
    Sweep {
        audio_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "8,16,22,28")]
        widths: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "8,16,22,28")]
        heights: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        budget: usize,
    },
    /// Print the reference figures.
    Reference,
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    if let Some(path) = &cli.config {
        load_config(Some(path), None)?;
    }
    let cfg = || load_config(cli.config.as_deref(), cli.seed);
    // Without --config, a checkpoint runs under the configuration it was
    // trained with.
    let ckpt_cfg = |ckpt: &std::path::Path| match &cli.config {
        Some(_) => cfg(),
        None => {
            let mut c = read_meta(ckpt)?.config;
            if let Some(s) = cli.seed {
                c.run.seed = s;
            }
            Ok(c)
        }
    };
    match &cli.cmd {
        Cmd::Synth { out_dir, budget, words } => {
            let n = cmd_synth(out_dir, words, *budget, cfg()?.run.seed)?;
            println!("wrote {n} clips to {}", out_dir.display());
        }
        Cmd::Preprocess { audio_dir, out_dir } => {
            let m = cmd_preprocess(audio_dir, out_dir, &cfg()?)?;
            for c in m.classes() {
                println!(
                    "{c}: {} train, {} test",
                    m.count(&c, raven_core::dataset::Split::Train),
                    m.count(&c, raven_core::dataset::Split::Test)
                );
            }
            println!("{} records in {}", m.records.len(), out_dir.join("manifest.tsv").display());
        }
        Cmd::Train { manifest, out_dir, checkpoint, budget } => {
            let cfg = cfg()?;
            let ds = load_dataset(manifest, *budget)?;
            let out = cmd_train(&ds, &cfg, out_dir, checkpoint.as_deref())?;
            for m in &out.log.epochs {
                println!(
                    "epoch {} test_error {}",
                    m.epoch,
                    m.test_error().map_or("-".into(), |e| format!("{e:.4}"))
                );
            }
            print!("{}", out.report.to_text());
        }
        Cmd::Infer { input, checkpoint } => {
            let out = cmd_infer(checkpoint, input, &ckpt_cfg(checkpoint)?)?;
            println!("class = {} ({})", out.class, out.label);
            println!("label_counts = {:?}", out.counts);
            print!("{}", out.report.to_text());
        }
        Cmd::Evaluate { manifest, checkpoint } => {
            let ds = load_dataset(manifest, None)?;
            print!("{}", cmd_evaluate(checkpoint, &ds, &ckpt_cfg(checkpoint)?)?.to_text());
        }
        Cmd::Compare { manifest, out_dir, budget } => {
            let ds = load_dataset(manifest, *budget)?;
            print!("{}", cmd_compare(&ds, &cfg()?, out_dir)?);
        }
        Cmd::Sweep { audio_dir, out_dir, widths, heights, budget } => {
            print!("{}", cmd_sweep(audio_dir, widths, heights, *budget, &cfg()?, out_dir)?);
        }
        Cmd::Reference => {
            println!("rbm_parameters = {}", reference::RBM_PARAMETERS);
            println!("fcnn_parameters = {}", reference::FCNN_PARAMETERS);
            println!("train_ratio = {}", reference::TRAIN_RATIO);
            println!("infer_ratio = {}", reference::INFER_RATIO);
            for (task, cnn, rbm) in reference::COMMAND_SET_ACCURACY {
                println!("{task}: cnn {cnn} rbm {rbm}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("raven-sim: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
