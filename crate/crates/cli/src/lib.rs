//! Library surface of the `sbcm` command-line tool.
//!
//! Everything the binary does is reachable through this crate, so the
//! end-to-end pipeline can be driven in-process by integration tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod sweep;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::Config;
use error::{CliError, Result};
use pipeline::{BweKind, FrontendConfig, FrontendKind};
use sbcm::channel::AugmentConfig;
use sbcm::filters::CutoffFraction;

#[derive(Parser, Debug)]
#[command(
    name = "sbcm",
    version,
    about = "Subband countermeasure toolkit: codec-robust anti-spoofing front-ends, training, and EER evaluation"
)]
pub struct Cli {
    /// Configuration file (flat key=value with [section] headers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides seed keys from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Parallel jobs for the sweep runner.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Output directory root.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic corpus and its manifest.
    Synth {
        /// Bonafide utterance count (overrides [corpus] n_bonafide).
        #[arg(long)]
        n_bonafide: Option<usize>,
        /// Spoof utterance count (overrides [corpus] n_spoof).
        #[arg(long)]
        n_spoof: Option<usize>,
    },
    /// Extract FBANK features for every manifest row.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        /// Front-end kind: baseline, band_trim, lowpass, lowpass_bwe.
        #[arg(long)]
        frontend: String,
        /// Cutoff fraction of Nyquist for non-baseline front-ends.
        #[arg(long)]
        fraction: Option<f64>,
        /// Bandwidth-extension kind: replicate or linear_regressor.
        #[arg(long, default_value = "replicate")]
        bwe_kind: String,
        /// Trained extender file (required for linear_regressor).
        #[arg(long)]
        bwe_model: Option<PathBuf>,
        /// Trim leading/trailing silence before anything else.
        #[arg(long)]
        vad: bool,
        /// Augment train-subset utterances with noise/reverb.
        #[arg(long)]
        augment: bool,
    },
    /// Train the classifier from featurized train/dev subsets.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features_dir: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Per-epoch TSV log (epoch, lr, train_loss, dev_loss).
        #[arg(long)]
        log_out: Option<PathBuf>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score the eval subset with a trained model.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scores_out: PathBuf,
        /// Precomputed feature directory; mutually exclusive with --frontend.
        #[arg(long)]
        features_dir: Option<PathBuf>,
        /// Recompute features on the fly with this front-end.
        #[arg(long)]
        frontend: Option<String>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, default_value = "replicate")]
        bwe_kind: String,
        #[arg(long)]
        bwe_model: Option<PathBuf>,
        #[arg(long)]
        vad: bool,
        /// Apply a codec to eval audio before the front-end.
        #[arg(long)]
        codec: Option<String>,
    },
    /// Compute the EER of a score file.
    Eer {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Train the bandwidth-extension regressor on the train subset.
    BweTrain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        ridge_lambda: f64,
        /// Cap the number of training utterances.
        #[arg(long)]
        max_utts: Option<usize>,
    },
    /// Run the full front-end/seed/codec cross-product.
    Sweep {},
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("corpus", "seed", seed.to_string());
        cfg.set("train", "seed", seed.to_string());
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn build_frontend(
    name: &str,
    fraction: Option<f64>,
    bwe_kind: &str,
    vad: bool,
    augment: bool,
    seed: u64,
) -> Result<FrontendConfig> {
    let kind = FrontendKind::parse(name)
        .ok_or_else(|| CliError::usage(format!("unknown front-end {name:?}")))?;
    let fraction = match fraction {
        Some(f) => Some(CutoffFraction::new(f).map_err(|e| CliError::usage(e.to_string()))?),
        None => None,
    };
    let bwe_kind = BweKind::parse(bwe_kind)
        .ok_or_else(|| CliError::usage(format!("unknown bwe kind {bwe_kind:?}")))?;
    let fe = FrontendConfig {
        kind,
        fraction,
        bwe_kind,
        vad,
        augment: augment.then(|| AugmentConfig { seed, ..Default::default() }),
    };
    fe.validate()?;
    Ok(fe)
}

/// Parse arguments and dispatch; the binary maps the error to an exit code.
pub fn run_with(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = out_dir(&cli);
    match &cli.command {
        Command::Synth { n_bonafide, n_spoof } => {
            let mut cfg = cfg;
            if let Some(n) = n_bonafide {
                cfg.set("corpus", "n_bonafide", n.to_string());
            }
            if let Some(n) = n_spoof {
                cfg.set("corpus", "n_spoof", n.to_string());
            }
            std::fs::create_dir_all(&out)?;
            commands::cmd_synth(&cfg, &out)?;
            Ok(())
        }
        Command::Featurize {
            manifest,
            frontend,
            fraction,
            bwe_kind,
            bwe_model,
            vad,
            augment,
        } => {
            let seed = cli.seed.unwrap_or(cfg.get_u64("train", "seed", 1)?);
            let fe = build_frontend(frontend, *fraction, bwe_kind, *vad, *augment, seed)?;
            std::fs::create_dir_all(&out)?;
            commands::cmd_featurize(manifest, &out, &fe, seed, bwe_model.as_deref())?;
            Ok(())
        }
        Command::Train { manifest, features_dir, model_out, log_out, batch_size, epochs } => {
            let (mut tc, sched) = commands::train_params_from_config(&cfg)?;
            if let Some(b) = batch_size {
                tc.batch_size = *b;
            }
            if let Some(e) = epochs {
                tc.epochs = *e;
            }
            if let Some(seed) = cli.seed {
                tc.seed = seed;
            }
            commands::cmd_train(manifest, features_dir, model_out, log_out.as_deref(), &tc, &sched)?;
            Ok(())
        }
        Command::Score {
            manifest,
            model,
            scores_out,
            features_dir,
            frontend,
            fraction,
            bwe_kind,
            bwe_model,
            vad,
            codec,
        } => {
            let seed = cli.seed.unwrap_or(cfg.get_u64("train", "seed", 1)?);
            let codec_profile = codec.as_deref().map(commands::parse_codec).transpose()?;
            match (features_dir, frontend) {
                (Some(dir), None) => {
                    if codec_profile.is_some() {
                        return Err(CliError::usage(
                            "--codec needs --frontend (features are recomputed from audio)",
                        ));
                    }
                    commands::cmd_score(
                        manifest,
                        model,
                        &commands::ScoreSource::FeaturesDir(dir),
                        scores_out,
                        seed,
                    )?;
                }
                (None, Some(name)) => {
                    let fe = build_frontend(name, *fraction, bwe_kind, *vad, false, seed)?;
                    commands::cmd_score(
                        manifest,
                        model,
                        &commands::ScoreSource::Frontend {
                            fe: &fe,
                            codec: codec_profile.as_ref(),
                            bwe_model: bwe_model.as_deref(),
                        },
                        scores_out,
                        seed,
                    )?;
                }
                _ => {
                    return Err(CliError::usage(
                        "score needs exactly one of --features-dir or --frontend",
                    ))
                }
            }
            Ok(())
        }
        Command::Eer { scores } => {
            commands::cmd_eer(scores)?;
            Ok(())
        }
        Command::BweTrain { manifest, fraction, model_out, ridge_lambda, max_utts } => {
            let fraction =
                CutoffFraction::new(*fraction).map_err(|e| CliError::usage(e.to_string()))?;
            commands::cmd_bwe_train(manifest, fraction, model_out, *ridge_lambda, *max_utts)?;
            Ok(())
        }
        Command::Sweep {} => {
            std::fs::create_dir_all(&out)?;
            let plan = sweep::plan_from_config(&cfg, &out)?;
            sweep::run_sweep(&plan, &out, cli.jobs.max(1))?;
            Ok(())
        }
    }
}

/// Entry point used by `main`; returns a process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run_with(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
