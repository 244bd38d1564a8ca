//! Implementations of the CLI subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use sbcm::bwe::{self, BweExtender};
use sbcm::channel::{CodecProfile, CorpusGenerator, CorpusSpec, Label, SplitSpec, Subset};
use sbcm::classifier::{self, LrSchedule, TrainConfig};
use sbcm::eval::{self, EerResult, ScoreSet};
use sbcm::features::{self, FbankMatrix};
use sbcm::filters::CutoffFraction;
use sbcm::signal;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::pipeline::{
    self, default_filterbank, read_manifest, wav_path, write_manifest, FrontendConfig,
    ManifestEntry,
};

/// Build the corpus spec from `[corpus]` config keys.
pub fn corpus_spec_from_config(cfg: &Config) -> Result<(CorpusSpec, SplitSpec)> {
    let defaults = CorpusSpec::default();
    let spec = CorpusSpec {
        n_bonafide: cfg.get_usize("corpus", "n_bonafide", 500)?,
        n_spoof: cfg.get_usize("corpus", "n_spoof", 500)?,
        duration_range_s: (
            cfg.get_f64("corpus", "duration_min_s", defaults.duration_range_s.0)?,
            cfg.get_f64("corpus", "duration_max_s", defaults.duration_range_s.1)?,
        ),
        sample_rate: cfg.get_u64("corpus", "sample_rate", 16000)? as u32,
        low_band_strength: cfg.get_f64("corpus", "low_band_strength", defaults.low_band_strength)?,
        high_band_strength: cfg
            .get_f64("corpus", "high_band_strength", defaults.high_band_strength)?,
        silence_pad_range_s: (
            cfg.get_f64("corpus", "silence_pad_min_s", defaults.silence_pad_range_s.0)?,
            cfg.get_f64("corpus", "silence_pad_max_s", defaults.silence_pad_range_s.1)?,
        ),
        seed: cfg.get_u64("corpus", "seed", 1)?,
    };
    let split = SplitSpec {
        train: cfg.get_f64("corpus", "split_train", 0.6)?,
        dev: cfg.get_f64("corpus", "split_dev", 0.2)?,
        eval: cfg.get_f64("corpus", "split_eval", 0.2)?,
    };
    Ok((spec, split))
}

/// Training parameters from `[train]` config keys (desk defaults).
pub fn train_params_from_config(cfg: &Config) -> Result<(TrainConfig, LrSchedule)> {
    let tc = TrainConfig {
        batch_size: cfg.get_usize("train", "batch_size", 64)?,
        epochs: cfg.get_usize("train", "epochs", 30)?,
        seed: cfg.get_u64("train", "seed", 1)?,
        dev_fraction: cfg.get_f64("train", "dev_fraction", 0.2)?,
    };
    let defaults = LrSchedule::default();
    let sched = LrSchedule {
        base_lr: cfg.get_f64("train", "base_lr", defaults.base_lr)?,
        warmup_epochs: cfg.get_usize("train", "warmup_epochs", defaults.warmup_epochs)?,
        plateau_patience: cfg.get_usize("train", "plateau_patience", defaults.plateau_patience)?,
        plateau_factor: cfg.get_f64("train", "plateau_factor", defaults.plateau_factor)?,
        min_lr: cfg.get_f64("train", "min_lr", defaults.min_lr)?,
    };
    Ok((tc, sched))
}

/// Generate the synthetic corpus: WAVs under `out_dir/wavs/` plus
/// `out_dir/manifest.tsv`. Returns the manifest path.
pub fn cmd_synth(cfg: &Config, out_dir: &Path) -> Result<PathBuf> {
    let (spec, split) = corpus_spec_from_config(cfg)?;
    let wav_dir = out_dir.join("wavs");
    std::fs::create_dir_all(&wav_dir)?;
    let generator = CorpusGenerator::new(spec, split);
    let mut entries = Vec::with_capacity(generator.len());
    for i in 0..generator.len() {
        let utt = generator.generate(i);
        let rel = format!("wavs/{}.wav", utt.id);
        signal::write_wav(&utt.audio, &out_dir.join(&rel))?;
        entries.push(ManifestEntry {
            utt_id: utt.id,
            rel_path: rel,
            label: utt.label,
            subset: utt.subset,
        });
    }
    let manifest = out_dir.join("manifest.tsv");
    write_manifest(&entries, &manifest)?;
    println!(
        "synthesized {} utterances ({} bonafide, {} spoof) -> {}",
        entries.len(),
        spec.n_bonafide,
        spec.n_spoof,
        manifest.display()
    );
    Ok(manifest)
}

#[derive(Debug, Default)]
pub struct FeaturizeSummary {
    pub written: usize,
    pub skipped_silence: usize,
}

/// Featurize every manifest row into `<out_dir>/<utt_id>.fbnk`.
pub fn cmd_featurize(
    manifest_path: &Path,
    out_dir: &Path,
    fe: &FrontendConfig,
    seed: u64,
    bwe_model: Option<&Path>,
) -> Result<FeaturizeSummary> {
    fe.validate()?;
    let entries = read_manifest(manifest_path)?;
    std::fs::create_dir_all(out_dir)?;
    let bank = default_filterbank();
    let extender = load_extender_if_needed(fe, bwe_model)?;
    let mut summary = FeaturizeSummary::default();
    let mut train_index = 0u64;
    for entry in &entries {
        let audio = signal::read_wav(&wav_path(manifest_path, entry))?;
        let augment_index = if entry.subset == Subset::Train {
            let idx = train_index;
            train_index += 1;
            idx
        } else {
            0
        };
        match pipeline::featurize_utterance(
            &audio,
            &entry.utt_id,
            entry.subset,
            fe,
            &bank,
            extender.as_ref(),
            None,
            seed,
            augment_index,
        )? {
            Some(feats) => {
                features::write_fbnk(&feats, &out_dir.join(format!("{}.fbnk", entry.utt_id)))?;
                summary.written += 1;
            }
            None => {
                eprintln!("skipping all-silence utterance {}", entry.utt_id);
                summary.skipped_silence += 1;
            }
        }
    }
    println!(
        "featurized {} utterances ({} skipped as all-silence) -> {}",
        summary.written,
        summary.skipped_silence,
        out_dir.display()
    );
    Ok(summary)
}

fn load_extender_if_needed(
    fe: &FrontendConfig,
    bwe_model: Option<&Path>,
) -> Result<Option<BweExtender>> {
    use crate::pipeline::{BweKind, FrontendKind};
    if fe.kind == FrontendKind::LowpassBwe && fe.bwe_kind == BweKind::LinearRegressor {
        let path = bwe_model.ok_or_else(|| {
            CliError::usage("--bwe-model is required for lowpass_bwe with linear_regressor")
        })?;
        Ok(Some(bwe::read_extender(path)?))
    } else {
        Ok(None)
    }
}

/// Load per-subset feature sets from a directory of `.fbnk` files, checking
/// dimensional consistency across files.
fn load_feature_sets(
    entries: &[ManifestEntry],
    features_dir: &Path,
    subsets: &[Subset],
) -> Result<Vec<Vec<(FbankMatrix, Label)>>> {
    let mut sets: Vec<Vec<(FbankMatrix, Label)>> = subsets.iter().map(|_| Vec::new()).collect();
    let mut first: Option<(usize, String)> = None;
    for entry in entries {
        let Some(slot) = subsets.iter().position(|s| *s == entry.subset) else {
            continue;
        };
        let path = features_dir.join(format!("{}.fbnk", entry.utt_id));
        if !path.exists() {
            // featurize may have skipped all-silence utterances
            continue;
        }
        let feats = features::read_fbnk(&path)?;
        match &first {
            None => first = Some((feats.rows, path.display().to_string())),
            Some((rows, first_path)) => {
                if feats.rows != *rows {
                    return Err(CliError::data(format!(
                        "feature dimension mismatch: {} has {} rows but {} has {} rows",
                        first_path,
                        rows,
                        path.display(),
                        feats.rows
                    )));
                }
            }
        }
        sets[slot].push((feats, entry.label));
    }
    Ok(sets)
}

pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub feat_dim: usize,
}

/// Train the classifier from featurized train/dev subsets; writes the model
/// and a per-epoch TSV log.
pub fn cmd_train(
    manifest_path: &Path,
    features_dir: &Path,
    model_out: &Path,
    log_out: Option<&Path>,
    tc: &TrainConfig,
    sched: &LrSchedule,
) -> Result<TrainSummary> {
    let entries = read_manifest(manifest_path)?;
    let mut sets = load_feature_sets(&entries, features_dir, &[Subset::Train, Subset::Dev])?;
    let dev_set = sets.pop().unwrap();
    let mut train_set = sets.pop().unwrap();
    if train_set.is_empty() {
        return Err(CliError::data("no train-subset features found".to_string()));
    }
    let dev_set = if dev_set.is_empty() {
        // carve a dev split from the tail of a seeded shuffle
        sbcm::rng::shuffle_seeded(&mut train_set, tc.seed);
        let n_dev = ((train_set.len() as f64 * tc.dev_fraction) as usize).max(1);
        train_set.split_off(train_set.len() - n_dev)
    } else {
        dev_set
    };
    let outcome = classifier::train(&train_set, &dev_set, tc, sched)?;
    if let Some(parent) = model_out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    classifier::write_model(&outcome.model, model_out)?;
    if let Some(log_path) = log_out {
        let mut f = std::io::BufWriter::new(std::fs::File::create(log_path)?);
        writeln!(f, "epoch\tlr\ttrain_loss\tdev_loss")?;
        for e in &outcome.log {
            writeln!(f, "{}\t{:.8e}\t{:.8e}\t{:.8e}", e.epoch, e.lr, e.train_loss, e.dev_loss)?;
        }
    }
    let best = &outcome.log[outcome.best_epoch - 1];
    println!(
        "trained on {} utterances, best dev loss {:.4} at epoch {} -> {}",
        train_set.len(),
        best.dev_loss,
        outcome.best_epoch,
        model_out.display()
    );
    Ok(TrainSummary {
        best_epoch: outcome.best_epoch,
        best_dev_loss: best.dev_loss,
        feat_dim: outcome.model.feat_dim,
    })
}

/// Where evaluation features come from when scoring.
pub enum ScoreSource<'a> {
    /// Precomputed `.fbnk` files.
    FeaturesDir(&'a Path),
    /// Recompute from WAVs, optionally through a codec first.
    Frontend { fe: &'a FrontendConfig, codec: Option<&'a CodecProfile>, bwe_model: Option<&'a Path> },
}

/// Score the eval subset; one line per utterance.
pub fn cmd_score(
    manifest_path: &Path,
    model_path: &Path,
    source: &ScoreSource,
    scores_out: &Path,
    seed: u64,
) -> Result<usize> {
    let entries = read_manifest(manifest_path)?;
    let model = classifier::read_model(model_path)?;
    let mut set = ScoreSet::default();
    match source {
        ScoreSource::FeaturesDir(dir) => {
            for entry in entries.iter().filter(|e| e.subset == Subset::Eval) {
                let path = dir.join(format!("{}.fbnk", entry.utt_id));
                if !path.exists() {
                    continue;
                }
                let feats = features::read_fbnk(&path)?;
                let s = classifier::score(&model, &feats)?;
                set.push(entry.utt_id.clone(), entry.label, s);
            }
        }
        ScoreSource::Frontend { fe, codec, bwe_model } => {
            fe.validate()?;
            let bank = default_filterbank();
            let extender = load_extender_if_needed(fe, *bwe_model)?;
            for entry in entries.iter().filter(|e| e.subset == Subset::Eval) {
                let audio = signal::read_wav(&wav_path(manifest_path, entry))?;
                match pipeline::featurize_utterance(
                    &audio,
                    &entry.utt_id,
                    entry.subset,
                    fe,
                    &bank,
                    extender.as_ref(),
                    *codec,
                    seed,
                    0,
                )? {
                    Some(feats) => {
                        let feats = feats.round_to_f32();
                        let s = classifier::score(&model, &feats)?;
                        set.push(entry.utt_id.clone(), entry.label, s);
                    }
                    None => eprintln!("skipping all-silence utterance {}", entry.utt_id),
                }
            }
        }
    }
    if set.is_empty() {
        return Err(CliError::data("no eval utterances were scored".to_string()));
    }
    if let Some(parent) = scores_out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    eval::write_scores(&set, scores_out)?;
    println!("scored {} eval utterances -> {}", set.len(), scores_out.display());
    Ok(set.len())
}

/// Compute and print the EER of a score file.
pub fn cmd_eer(scores_path: &Path) -> Result<EerResult> {
    let set = eval::read_scores(scores_path)?;
    let result = eval::compute_eer(&set)?;
    println!(
        "EER {:.4}% at threshold {:.6} ({} bonafide, {} spoof)",
        100.0 * result.eer,
        result.threshold,
        result.n_bonafide,
        result.n_spoof
    );
    Ok(result)
}

/// Train the bandwidth-extension regressor on the train subset.
pub fn cmd_bwe_train(
    manifest_path: &Path,
    fraction: CutoffFraction,
    model_out: &Path,
    ridge_lambda: f64,
    max_utts: Option<usize>,
) -> Result<()> {
    let entries = read_manifest(manifest_path)?;
    let mut trainer = bwe::RegressorTrainer::new(fraction)?;
    let mut used = 0usize;
    for entry in entries.iter().filter(|e| e.subset == Subset::Train) {
        if let Some(cap) = max_utts {
            if used >= cap {
                break;
            }
        }
        let wide = signal::read_wav(&wav_path(manifest_path, entry))?;
        let narrow = sbcm::filters::lowpass_frontend(&wide, fraction)?;
        trainer.accumulate(&narrow, &wide)?;
        used += 1;
    }
    let frames = trainer.frames();
    let extender = trainer.finish(ridge_lambda)?;
    if let Some(parent) = model_out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    bwe::write_extender(&extender, model_out)?;
    println!(
        "trained bwe regressor on {used} utterances ({frames} frames) -> {}",
        model_out.display()
    );
    Ok(())
}

/// Parse a codec name from CLI/config text.
pub fn parse_codec(name: &str) -> Result<CodecProfile> {
    CodecProfile::parse(name)
        .ok_or_else(|| CliError::usage(format!("unknown codec {name:?} (clean, g711_mulaw, bandlimit)")))
}

/// Score an in-memory model against in-memory eval features; shared by the
/// sweep runner.
pub fn score_set_from_features(
    model: &classifier::AspModel,
    eval_set: &[(String, FbankMatrix, Label)],
) -> Result<ScoreSet> {
    let mut set = ScoreSet::default();
    for (id, feats, label) in eval_set {
        let s = classifier::score(model, feats)?;
        set.push(id.clone(), *label, s);
    }
    Ok(set)
}

/// Copy of [`channel::generate_corpus`] statistics printed by `synth`.
pub fn manifest_summary(entries: &[ManifestEntry]) -> String {
    let count = |s: Subset| entries.iter().filter(|e| e.subset == s).count();
    format!(
        "train {} / dev {} / eval {}",
        count(Subset::Train),
        count(Subset::Dev),
        count(Subset::Eval)
    )
}
