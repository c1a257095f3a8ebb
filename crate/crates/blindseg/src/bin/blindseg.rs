//! Command-line entry points for the boundary-detection pipeline.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
//! failure. Results go to stdout, diagnostics to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blindseg::checkpoint::{load_checkpoint, save_checkpoint};
use blindseg::config::RunConfig;
use blindseg::corpus::{load_wav, synth_corpus, Manifest, SynthSpec};
use blindseg::encoder::EncoderConfig;
use blindseg::error::Error;
use blindseg::segmenter::{
    boundary_scores, detect_peaks, evaluate_manifest, frames_to_times, normalize_scores,
    parse_grid, tune_delta, PeakParams, TuneObjective,
};
use blindseg::train::{train, TrainConfig};

#[derive(Parser)]
#[command(name = "blindseg", version, about = "Self-supervised phoneme boundary detection on raw audio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an encoder with the contrastive objective.
    Train {
        /// Manifest of training audio (annotations optional).
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest of validation audio for early stopping.
        #[arg(long = "val-manifest")]
        val_manifest: PathBuf,
        /// Checkpoint output path; history lands at <out>.history.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "batch-size")]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Distractors per reference frame (K).
        #[arg(long = "neg-k")]
        neg_k: Option<usize>,
        #[arg(long = "crop-sec")]
        crop_sec: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long = "proj-dim")]
        proj_dim: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Segment one waveform with a trained model.
    Segment {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Peak prominence threshold (in [0,1] with normalization on).
        #[arg(long)]
        delta: Option<f64>,
        /// Apply the prominence threshold to raw scores instead of
        /// per-utterance min-max normalized scores.
        #[arg(long = "no-normalize")]
        no_normalize: bool,
        /// Write `index\traw\tnormalized` score lines here.
        #[arg(long = "dump-scores")]
        dump_scores: Option<PathBuf>,
        /// Boundary file destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sweep the prominence threshold on an annotated manifest.
    Tune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Inclusive sweep as start:stop:step.
        #[arg(long)]
        grid: Option<String>,
        /// Objective: rval (default) or f1.
        #[arg(long)]
        metric: Option<String>,
        /// Match tolerance in seconds.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long = "no-normalize")]
        no_normalize: bool,
        /// Count utterance edges as boundaries on both sides.
        #[arg(long = "include-edges")]
        include_edges: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a model against gold annotations.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long = "no-normalize")]
        no_normalize: bool,
        #[arg(long = "include-edges")]
        include_edges: bool,
        /// Also print one report line per utterance.
        #[arg(long = "per-utterance")]
        per_utterance: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with exact gold boundaries.
    Synth {
        /// Output directory for WAV/annotation pairs and manifests.
        #[arg(long)]
        out: PathBuf,
        /// Number of utterances.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// The effective configuration echo: toolkit version and seed first, then
/// every key=value, all on stderr before any work starts.
fn echo_config(command: &str, seed: Option<u64>, pairs: &[(&str, String)]) {
    eprintln!("blindseg {}", env!("CARGO_PKG_VERSION"));
    match seed {
        Some(s) => eprintln!("seed={s}"),
        None => eprintln!("seed=-"),
    }
    eprintln!("command={command}");
    for (k, v) in pairs {
        eprintln!("{k}={v}");
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            manifest,
            val_manifest,
            out,
            config,
            epochs,
            batch_size,
            lr,
            neg_k,
            crop_sec,
            patience,
            proj_dim,
            seed,
        } => {
            let flags = RunConfig {
                epochs,
                batch_size,
                lr,
                neg_k,
                crop_sec,
                patience,
                proj_dim,
                seed,
                ..RunConfig::default()
            };
            let eff = load_file_config(&config)?.overlaid(flags);
            let train_cfg = TrainConfig {
                batch_size: eff.batch_size.unwrap_or(8),
                lr: eff.lr.unwrap_or(1e-4),
                epochs: eff.epochs.unwrap_or(50),
                negatives: eff.neg_k.unwrap_or(5),
                crop_seconds: eff.crop_sec.unwrap_or(1.0),
                patience: eff.patience.unwrap_or(5),
                seed: eff.seed.unwrap_or(0),
            };
            let enc_cfg = EncoderConfig {
                projection_dim: eff.proj_dim.unwrap_or(64),
                ..EncoderConfig::default()
            };
            echo_config(
                "train",
                Some(train_cfg.seed),
                &[
                    ("manifest", manifest.display().to_string()),
                    ("val-manifest", val_manifest.display().to_string()),
                    ("out", out.display().to_string()),
                    ("epochs", train_cfg.epochs.to_string()),
                    ("batch-size", train_cfg.batch_size.to_string()),
                    ("lr", train_cfg.lr.to_string()),
                    ("neg-k", train_cfg.negatives.to_string()),
                    ("crop-sec", train_cfg.crop_seconds.to_string()),
                    ("patience", train_cfg.patience.to_string()),
                    ("proj-dim", enc_cfg.projection_dim.to_string()),
                ],
            );
            train_cfg.validate()?;
            let train_m = Manifest::load(&manifest)?;
            let val_m = Manifest::load(&val_manifest)?;
            let (enc, history) = train(&train_m, &val_m, enc_cfg, &train_cfg)?;
            save_checkpoint(&enc, &out)?;
            let history_path = sibling(&out, "history.tsv");
            std::fs::write(&history_path, history.to_tsv())
                .map_err(|e| Error::io(&history_path, e))?;
            println!(
                "checkpoint\t{}\nhistory\t{}\nbest_epoch\t{}\nbest_val_loss\t{:.6}",
                out.display(),
                history_path.display(),
                history.best_epoch,
                enc.meta.best_val_loss
            );
            Ok(())
        }

        Command::Segment {
            model,
            wav,
            delta,
            no_normalize,
            dump_scores,
            out,
            config,
        } => {
            let eff = load_file_config(&config)?.overlaid(RunConfig {
                delta,
                normalize: if no_normalize { Some(false) } else { None },
                ..RunConfig::default()
            });
            let params = PeakParams {
                delta: eff
                    .delta
                    .ok_or_else(|| Error::Config("--delta is required".into()))?,
                normalize: eff.normalize.unwrap_or(true),
                time_offset: 0.0,
            };
            echo_config(
                "segment",
                None,
                &[
                    ("model", model.display().to_string()),
                    ("wav", wav.display().to_string()),
                    ("delta", params.delta.to_string()),
                    ("normalize", params.normalize.to_string()),
                ],
            );
            let enc = load_checkpoint(&model)?;
            let audio = load_wav(&wav)?;
            let z = enc.encode(&audio)?;
            let raw = boundary_scores(&z)?;
            let norm = normalize_scores(&raw);
            let peaks = if params.normalize {
                detect_peaks(&norm.scores, params.delta)
            } else {
                detect_peaks(&raw.scores, params.delta)
            };
            let bounds = frames_to_times(&peaks, z.hop_samples, z.sample_rate, z.time_offset);
            let mut text = String::new();
            for &t in bounds.times() {
                text.push_str(&format!("{t:.6}\n"));
            }
            match &out {
                Some(p) => std::fs::write(p, &text).map_err(|e| Error::io(p, e))?,
                None => print!("{text}"),
            }
            if let Some(p) = &dump_scores {
                let mut dump = String::new();
                for (i, (r, n)) in raw.scores.iter().zip(&norm.scores).enumerate() {
                    dump.push_str(&format!("{i}\t{r:.6}\t{n:.6}\n"));
                }
                std::fs::write(p, dump).map_err(|e| Error::io(p, e))?;
            }
            Ok(())
        }

        Command::Tune {
            model,
            manifest,
            grid,
            metric,
            tolerance,
            no_normalize,
            include_edges,
            config,
        } => {
            let eff = load_file_config(&config)?.overlaid(RunConfig {
                grid,
                metric,
                tolerance,
                normalize: if no_normalize { Some(false) } else { None },
                include_edges: if include_edges { Some(true) } else { None },
                ..RunConfig::default()
            });
            let grid_spec = eff.grid.unwrap_or_else(|| "0:1:0.05".to_string());
            let objective: TuneObjective = eff.metric.as_deref().unwrap_or("rval").parse()?;
            let tolerance = eff.tolerance.unwrap_or(0.02);
            let normalize = eff.normalize.unwrap_or(true);
            let edges = eff.include_edges.unwrap_or(false);
            echo_config(
                "tune",
                None,
                &[
                    ("model", model.display().to_string()),
                    ("manifest", manifest.display().to_string()),
                    ("grid", grid_spec.clone()),
                    ("metric", format!("{objective:?}")),
                    ("tolerance", tolerance.to_string()),
                    ("normalize", normalize.to_string()),
                    ("include-edges", edges.to_string()),
                ],
            );
            let enc = load_checkpoint(&model)?;
            let m = Manifest::load(&manifest)?;
            let grid = parse_grid(&grid_spec)?;
            let (best, table) =
                tune_delta(&enc, &m, &grid, tolerance, objective, normalize, 0.0, edges)?;
            println!("delta\tprecision\trecall\tf1\tos\tr_value");
            for (d, r) in &table {
                println!(
                    "{d:.4}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
                    r.precision * 100.0,
                    r.recall * 100.0,
                    r.f1 * 100.0,
                    r.os * 100.0,
                    r.r_value * 100.0
                );
            }
            println!("best_delta\t{best:.4}");
            Ok(())
        }

        Command::Eval {
            model,
            manifest,
            delta,
            tolerance,
            no_normalize,
            include_edges,
            per_utterance,
            config,
        } => {
            let eff = load_file_config(&config)?.overlaid(RunConfig {
                delta,
                tolerance,
                normalize: if no_normalize { Some(false) } else { None },
                include_edges: if include_edges { Some(true) } else { None },
                ..RunConfig::default()
            });
            let params = PeakParams {
                delta: eff
                    .delta
                    .ok_or_else(|| Error::Config("--delta is required".into()))?,
                normalize: eff.normalize.unwrap_or(true),
                time_offset: 0.0,
            };
            let tolerance = eff.tolerance.unwrap_or(0.02);
            let edges = eff.include_edges.unwrap_or(false);
            echo_config(
                "eval",
                None,
                &[
                    ("model", model.display().to_string()),
                    ("manifest", manifest.display().to_string()),
                    ("delta", params.delta.to_string()),
                    ("tolerance", tolerance.to_string()),
                    ("normalize", params.normalize.to_string()),
                    ("include-edges", edges.to_string()),
                ],
            );
            let enc = load_checkpoint(&model)?;
            let m = Manifest::load(&manifest)?;
            let (pooled, per_utt) = evaluate_manifest(&enc, &m, &params, tolerance, edges)?;
            print!("{pooled}");
            if per_utterance {
                for (key, r) in &per_utt {
                    print!("{key}\t{r}");
                }
            }
            print!("{}", pooled.machine_lines());
            Ok(())
        }

        Command::Synth {
            out,
            n,
            seed,
            config,
        } => {
            let eff = load_file_config(&config)?.overlaid(RunConfig {
                n,
                seed,
                ..RunConfig::default()
            });
            let spec = SynthSpec {
                utterances: eff.n.unwrap_or(100),
                seed: eff.seed.unwrap_or(0),
                ..SynthSpec::default()
            };
            echo_config(
                "synth",
                Some(spec.seed),
                &[
                    ("out", out.display().to_string()),
                    ("n", spec.utterances.to_string()),
                ],
            );
            if spec.utterances == 0 {
                return Err(Error::Config("--n must be >= 1".into()));
            }
            let manifest = synth_corpus(&out, &spec)?;
            let (train_m, val_m, test_m) = manifest.split(0.8, 0.1);
            let write = |m: &Manifest, name: &str| -> Result<PathBuf, Error> {
                let p = out.join(name);
                m.save(&p)?;
                Ok(p)
            };
            let all = write(&manifest, "all.tsv")?;
            let tr = write(&train_m, "train.tsv")?;
            let va = write(&val_m, "val.tsv")?;
            let te = write(&test_m, "test.tsv")?;
            println!(
                "all\t{}\ntrain\t{}\nval\t{}\ntest\t{}",
                all.display(),
                tr.display(),
                va.display(),
                te.display()
            );
            Ok(())
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map_or_else(|| std::ffi::OsString::from("out"), |n| n.to_os_string());
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}
