//! Sweep runner: the cross-product of front-ends, cutoff fractions, seeds,
//! VAD conditions, and evaluation codecs, with content-hashed cell caching
//! so interrupted sweeps resume where they stopped.
//!
//! A *train cell* is `(frontend, fraction, vad, seed)`; it produces one
//! model which is then scored once per evaluation codec. Features live in
//! memory (rounded through f32 to match the on-disk feature format); models,
//! score files, and per-codec results are cached under `out/cells/`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sbcm::bwe::{self, BweExtender};
use sbcm::channel::{AugmentConfig, CodecProfile, Label, Subset};
use sbcm::classifier::{self, LrSchedule, TrainConfig};
use sbcm::eval::{self, ScoreSet};
use sbcm::features::FbankMatrix;
use sbcm::filters::CutoffFraction;
use sbcm::signal;

use crate::commands;
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::pipeline::{
    self, default_filterbank, read_manifest, wav_path, BweKind, FrontendConfig, FrontendKind,
    ManifestEntry,
};

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub manifest: PathBuf,
    pub frontends: Vec<FrontendKind>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub codecs: Vec<CodecProfile>,
    pub vads: Vec<bool>,
    pub bwe_kind: BweKind,
    pub ridge_lambda: f64,
    /// Augmentation template; the per-cell seed replaces the seed field.
    pub augment: Option<AugmentConfig>,
    pub batch_size: usize,
    pub epochs: usize,
    pub dev_fraction: f64,
    pub schedule: LrSchedule,
}

/// Build the plan from `[sweep]`, `[train]`, `[augment]`, and `[corpus]`
/// sections; synthesizes the corpus when no manifest is configured.
pub fn plan_from_config(cfg: &Config, out_dir: &Path) -> Result<SweepPlan> {
    let manifest = match cfg.get("sweep", "manifest") {
        Some(path) => PathBuf::from(path),
        None => {
            let corpus_dir = out_dir.join("corpus");
            let manifest = corpus_dir.join("manifest.tsv");
            if manifest.exists() {
                manifest
            } else {
                std::fs::create_dir_all(&corpus_dir)?;
                commands::cmd_synth(cfg, &corpus_dir)?
            }
        }
    };

    let frontends = cfg
        .get_list("sweep", "frontends", "baseline,band_trim,lowpass,lowpass_bwe")
        .iter()
        .map(|s| {
            FrontendKind::parse(s)
                .ok_or_else(|| CliError::usage(format!("unknown front-end {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let fractions = cfg
        .get_list("sweep", "fractions", "0.2,0.3,0.4,0.5,0.6,0.7")
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad fraction {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let seeds = cfg
        .get_list("sweep", "seeds", "1,10,100")
        .iter()
        .map(|s| s.parse::<u64>().map_err(|_| CliError::usage(format!("bad seed {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let codecs = cfg
        .get_list("sweep", "codecs", "clean,g711_mulaw")
        .iter()
        .map(|s| commands::parse_codec(s))
        .collect::<Result<Vec<_>>>()?;
    let vads = cfg
        .get_list("sweep", "vad", "off")
        .iter()
        .map(|s| match s.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(CliError::usage(format!("vad list entries are on/off, got {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let bwe_kind = {
        let raw = cfg.get("sweep", "bwe_kind").unwrap_or("linear_regressor");
        BweKind::parse(raw).ok_or_else(|| CliError::usage(format!("unknown bwe kind {raw:?}")))?
    };

    let augment = if cfg.get_bool("sweep", "augment", true)? {
        let d = AugmentConfig::default();
        Some(AugmentConfig {
            apply_probability: cfg.get_f64("augment", "apply_probability", d.apply_probability)?,
            snr_range_db: (
                cfg.get_f64("augment", "snr_min_db", d.snr_range_db.0)?,
                cfg.get_f64("augment", "snr_max_db", d.snr_range_db.1)?,
            ),
            reverb_rt60_range_s: (
                cfg.get_f64("augment", "rt60_min_s", d.reverb_rt60_range_s.0)?,
                cfg.get_f64("augment", "rt60_max_s", d.reverb_rt60_range_s.1)?,
            ),
            seed: 0,
        })
    } else {
        None
    };

    let (tc, schedule) = commands::train_params_from_config(cfg)?;
    Ok(SweepPlan {
        manifest,
        frontends,
        fractions,
        seeds,
        codecs,
        vads,
        bwe_kind,
        ridge_lambda: cfg.get_f64("sweep", "ridge_lambda", 1e-3)?,
        augment,
        batch_size: tc.batch_size,
        epochs: tc.epochs,
        dev_fraction: tc.dev_fraction,
        schedule,
    })
}

/// One training cell of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainCell {
    pub frontend: FrontendKind,
    pub fraction: Option<f64>,
    pub vad: bool,
    pub seed: u64,
}

impl TrainCell {
    pub fn key(&self) -> String {
        format!(
            "frontend={} fraction={} vad={} seed={}",
            self.frontend.as_str(),
            self.fraction.map_or("-".into(), |f| format!("{f}")),
            if self.vad { "on" } else { "off" },
            self.seed
        )
    }
}

/// Result of one `(train cell, codec)` evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub frontend: String,
    pub fraction: Option<f64>,
    pub vad: bool,
    pub seed: u64,
    pub codec: String,
    pub eer: Option<f64>,
    pub threshold: Option<f64>,
    pub n_scored: usize,
    pub skipped_eval: usize,
    pub error: Option<String>,
    #[serde(default)]
    pub cached: bool,
    #[serde(default)]
    pub seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CodecOutcomeFile {
    eer: f64,
    threshold: f64,
    n_bonafide: usize,
    n_spoof: usize,
    skipped_eval: usize,
}

pub struct SweepOutcome {
    pub results: Vec<CellResult>,
    pub csv_path: PathBuf,
    pub table_path: PathBuf,
    pub run_manifest_path: PathBuf,
}

fn frontend_fractions(plan: &SweepPlan, kind: FrontendKind) -> Vec<Option<f64>> {
    if kind.needs_fraction() {
        plan.fractions.iter().map(|&f| Some(f)).collect()
    } else {
        vec![None]
    }
}

/// All train cells in deterministic order.
pub fn enumerate_cells(plan: &SweepPlan) -> Vec<TrainCell> {
    let mut cells = Vec::new();
    for &vad in &plan.vads {
        for &frontend in &plan.frontends {
            for fraction in frontend_fractions(plan, frontend) {
                for &seed in &plan.seeds {
                    cells.push(TrainCell { frontend, fraction, vad, seed });
                }
            }
        }
    }
    cells
}

fn frontend_config(plan: &SweepPlan, cell: &TrainCell) -> Result<FrontendConfig> {
    let fraction = match cell.fraction {
        Some(f) => Some(CutoffFraction::new(f).map_err(|e| CliError::usage(e.to_string()))?),
        None => None,
    };
    Ok(FrontendConfig {
        kind: cell.frontend,
        fraction,
        bwe_kind: plan.bwe_kind,
        vad: cell.vad,
        augment: plan.augment.map(|mut a| {
            a.seed = cell.seed;
            a
        }),
    })
}

fn cell_hash(plan: &SweepPlan, cell: &TrainCell, manifest_digest: &str, fe: &FrontendConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(manifest_digest.as_bytes());
    hasher.update(fe.describe().as_bytes());
    hasher.update(cell.key().as_bytes());
    hasher.update(
        format!(
            "batch={} epochs={} dev={} lr={} warmup={} patience={} factor={} min_lr={} lambda={}",
            plan.batch_size,
            plan.epochs,
            plan.dev_fraction,
            plan.schedule.base_lr,
            plan.schedule.warmup_epochs,
            plan.schedule.plateau_patience,
            plan.schedule.plateau_factor,
            plan.schedule.min_lr,
            plan.ridge_lambda,
        )
        .as_bytes(),
    );
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(32);
    for b in &digest[..16] {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

fn manifest_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

/// Train all bandwidth-extension regressors the plan needs, one per cutoff
/// fraction, cached on disk; they are seed-independent (closed-form fit).
fn ensure_bwe_extenders(
    plan: &SweepPlan,
    cells: &[TrainCell],
    cells_dir: &Path,
) -> Result<std::collections::BTreeMap<String, BweExtender>> {
    let mut extenders = std::collections::BTreeMap::new();
    if plan.bwe_kind != BweKind::LinearRegressor {
        return Ok(extenders);
    }
    let mut fractions: Vec<f64> = cells
        .iter()
        .filter(|c| c.frontend == FrontendKind::LowpassBwe)
        .filter_map(|c| c.fraction)
        .collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    for fraction in fractions {
        let path = cells_dir.join(format!("bwe-{fraction}.bwe"));
        let extender = if path.exists() {
            bwe::read_extender(&path)?
        } else {
            let frac = CutoffFraction::new(fraction).map_err(|e| CliError::usage(e.to_string()))?;
            commands::cmd_bwe_train(&plan.manifest, frac, &path, plan.ridge_lambda, None)?;
            bwe::read_extender(&path)?
        };
        extenders.insert(format!("{fraction}"), extender);
    }
    Ok(extenders)
}

struct CellContext<'a> {
    plan: &'a SweepPlan,
    entries: &'a [ManifestEntry],
    manifest_digest: String,
    cells_dir: PathBuf,
    extenders: std::collections::BTreeMap<String, BweExtender>,
}

fn run_train_cell(ctx: &CellContext, cell: &TrainCell) -> Vec<CellResult> {
    let started = Instant::now();
    let base = |error: Option<String>| CellResult {
        frontend: cell.frontend.as_str().to_string(),
        fraction: cell.fraction,
        vad: cell.vad,
        seed: cell.seed,
        codec: String::new(),
        eer: None,
        threshold: None,
        n_scored: 0,
        skipped_eval: 0,
        error,
        cached: false,
        seconds: 0.0,
    };

    let fe = match frontend_config(ctx.plan, cell) {
        Ok(fe) => fe,
        Err(e) => {
            return ctx
                .plan
                .codecs
                .iter()
                .map(|c| CellResult {
                    codec: c.name().to_string(),
                    ..base(Some(e.to_string()))
                })
                .collect()
        }
    };
    let hash = cell_hash(ctx.plan, cell, &ctx.manifest_digest, &fe);
    let cell_dir = ctx.cells_dir.join(&hash);

    // resume: all per-codec outcomes already on disk
    let cached: Vec<Option<CodecOutcomeFile>> = ctx
        .plan
        .codecs
        .iter()
        .map(|c| {
            let path = cell_dir.join(format!("{}.json", c.name()));
            std::fs::read_to_string(&path)
                .ok()
                .and_then(|text| serde_json::from_str(&text).ok())
        })
        .collect();
    if cached.iter().all(Option::is_some) {
        return ctx
            .plan
            .codecs
            .iter()
            .zip(cached)
            .map(|(codec, outcome)| {
                let o = outcome.unwrap();
                CellResult {
                    codec: codec.name().to_string(),
                    eer: Some(o.eer),
                    threshold: Some(o.threshold),
                    n_scored: o.n_bonafide + o.n_spoof,
                    skipped_eval: o.skipped_eval,
                    cached: true,
                    seconds: 0.0,
                    ..base(None)
                }
            })
            .collect();
    }

    match run_train_cell_inner(ctx, cell, &fe, &cell_dir) {
        Ok(results) => results
            .into_iter()
            .map(|mut r| {
                r.seconds = started.elapsed().as_secs_f64();
                r
            })
            .collect(),
        Err(e) => ctx
            .plan
            .codecs
            .iter()
            .map(|c| CellResult {
                codec: c.name().to_string(),
                seconds: started.elapsed().as_secs_f64(),
                ..base(Some(e.to_string()))
            })
            .collect(),
    }
}

fn run_train_cell_inner(
    ctx: &CellContext,
    cell: &TrainCell,
    fe: &FrontendConfig,
    cell_dir: &Path,
) -> Result<Vec<CellResult>> {
    std::fs::create_dir_all(cell_dir)?;
    let bank = default_filterbank();
    let extender = cell
        .fraction
        .and_then(|f| ctx.extenders.get(&format!("{f}")))
        .filter(|_| fe.kind == FrontendKind::LowpassBwe && fe.bwe_kind == BweKind::LinearRegressor);

    // featurize train and dev in memory
    let mut train_set: Vec<(FbankMatrix, Label)> = Vec::new();
    let mut dev_set: Vec<(FbankMatrix, Label)> = Vec::new();
    let mut train_index = 0u64;
    for entry in ctx.entries {
        if entry.subset == Subset::Eval {
            continue;
        }
        let audio = signal::read_wav(&wav_path(&ctx.plan.manifest, entry))?;
        let augment_index = if entry.subset == Subset::Train {
            let idx = train_index;
            train_index += 1;
            idx
        } else {
            0
        };
        let feats = pipeline::featurize_utterance(
            &audio,
            &entry.utt_id,
            entry.subset,
            fe,
            &bank,
            extender,
            None,
            cell.seed,
            augment_index,
        )?;
        if let Some(feats) = feats {
            let feats = feats.round_to_f32();
            match entry.subset {
                Subset::Train => train_set.push((feats, entry.label)),
                Subset::Dev => dev_set.push((feats, entry.label)),
                Subset::Eval => unreachable!(),
            }
        }
    }

    let tc = TrainConfig {
        batch_size: ctx.plan.batch_size,
        epochs: ctx.plan.epochs,
        seed: cell.seed,
        dev_fraction: ctx.plan.dev_fraction,
    };
    let outcome = classifier::train(&train_set, &dev_set, &tc, &ctx.plan.schedule)?;
    classifier::write_model(&outcome.model, &cell_dir.join("model.asp"))?;
    drop(train_set);
    drop(dev_set);

    // score the eval subset once per codec
    let mut results = Vec::new();
    for codec in &ctx.plan.codecs {
        let mut set = ScoreSet::default();
        let mut skipped = 0usize;
        let codec_arg = match codec {
            CodecProfile::Clean => None,
            other => Some(other),
        };
        for entry in ctx.entries.iter().filter(|e| e.subset == Subset::Eval) {
            let audio = signal::read_wav(&wav_path(&ctx.plan.manifest, entry))?;
            match pipeline::featurize_utterance(
                &audio,
                &entry.utt_id,
                entry.subset,
                fe,
                &bank,
                extender,
                codec_arg,
                cell.seed,
                0,
            )? {
                Some(feats) => {
                    let feats = feats.round_to_f32();
                    let s = classifier::score(&outcome.model, &feats)?;
                    set.push(entry.utt_id.clone(), entry.label, s);
                }
                None => skipped += 1,
            }
        }
        eval::write_scores(&set, &cell_dir.join(format!("scores-{}.tsv", codec.name())))?;
        let eer = eval::compute_eer(&set)?;
        let file = CodecOutcomeFile {
            eer: eer.eer,
            threshold: eer.threshold,
            n_bonafide: eer.n_bonafide,
            n_spoof: eer.n_spoof,
            skipped_eval: skipped,
        };
        std::fs::write(
            cell_dir.join(format!("{}.json", codec.name())),
            serde_json::to_string_pretty(&file).map_err(|e| CliError::internal(e.to_string()))?,
        )?;
        results.push(CellResult {
            frontend: cell.frontend.as_str().to_string(),
            fraction: cell.fraction,
            vad: cell.vad,
            seed: cell.seed,
            codec: codec.name().to_string(),
            eer: Some(eer.eer),
            threshold: Some(eer.threshold),
            n_scored: eer.n_bonafide + eer.n_spoof,
            skipped_eval: skipped,
            error: None,
            cached: false,
            seconds: 0.0,
        });
    }
    Ok(results)
}

/// Run the whole sweep. `jobs` bounds cell-level parallelism; each cell is
/// single-threaded, so results do not depend on scheduling.
pub fn run_sweep(plan: &SweepPlan, out_dir: &Path, jobs: usize) -> Result<SweepOutcome> {
    let entries = read_manifest(&plan.manifest)?;
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)?;
    let cells = enumerate_cells(plan);
    if cells.is_empty() || plan.codecs.is_empty() {
        return Err(CliError::usage("sweep plan has no cells".to_string()));
    }
    let extenders = ensure_bwe_extenders(plan, &cells, &cells_dir)?;
    let ctx = CellContext {
        plan,
        entries: &entries,
        manifest_digest: manifest_digest(&plan.manifest)?,
        cells_dir,
        extenders,
    };

    let mut results: Vec<CellResult> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::internal(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells.par_iter().flat_map(|cell| run_train_cell(&ctx, cell)).collect()
        })
    } else {
        cells.iter().flat_map(|cell| run_train_cell(&ctx, cell)).collect()
    };

    results.sort_by(|a, b| {
        (a.vad, &a.frontend, a.fraction.unwrap_or(-1.0), a.seed, &a.codec)
            .partial_cmp(&(b.vad, &b.frontend, b.fraction.unwrap_or(-1.0), b.seed, &b.codec))
            .unwrap()
    });

    let run_manifest_path = out_dir.join("run_manifest.jsonl");
    {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&run_manifest_path)?);
        for r in &results {
            writeln!(f, "{}", serde_json::to_string(r).map_err(|e| CliError::internal(e.to_string()))?)?;
        }
    }

    let csv_path = out_dir.join("results.csv");
    write_results_csv(&results, plan, &csv_path)?;
    let table_path = out_dir.join("table.txt");
    let table = render_tables(&results, plan);
    std::fs::write(&table_path, &table)?;
    println!("{table}");
    println!("sweep complete: {} result rows -> {}", results.len(), csv_path.display());
    Ok(SweepOutcome { results, csv_path, table_path, run_manifest_path })
}

fn fraction_token(f: Option<f64>) -> String {
    f.map_or("-".to_string(), |v| format!("{v}"))
}

/// CSV: per-cell rows plus one `seed=avg` row per (frontend, fraction,
/// codec, vad) group.
fn write_results_csv(results: &[CellResult], plan: &SweepPlan, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "system,frontend,fraction,codec,vad,seed,eer")?;
    let mut groups: std::collections::BTreeMap<String, Vec<&CellResult>> =
        std::collections::BTreeMap::new();
    for r in results {
        let eer = r.eer.map_or("NaN".to_string(), |e| format!("{e:.6}"));
        writeln!(
            f,
            "asp,{},{},{},{},{},{}",
            r.frontend,
            fraction_token(r.fraction),
            r.codec,
            if r.vad { "on" } else { "off" },
            r.seed,
            eer
        )?;
        groups
            .entry(format!(
                "{},{},{},{}",
                r.frontend,
                fraction_token(r.fraction),
                r.codec,
                if r.vad { "on" } else { "off" }
            ))
            .or_default()
            .push(r);
    }
    let _ = plan;
    for (key, rows) in groups {
        let eers: Vec<f64> = rows.iter().filter_map(|r| r.eer).collect();
        let avg = if eers.is_empty() {
            "NaN".to_string()
        } else {
            format!("{:.6}", eers.iter().sum::<f64>() / eers.len() as f64)
        };
        writeln!(f, "asp,{key},avg,{avg}")?;
    }
    Ok(())
}

/// Text tables in the style of a published seed table: one block per
/// (codec, vad) condition, rows by front-end and fraction, seed columns plus
/// the average, EER in percent.
fn render_tables(results: &[CellResult], plan: &SweepPlan) -> String {
    let mut out = String::new();
    for &vad in &plan.vads {
        for codec in &plan.codecs {
            out.push_str(&format!(
                "== codec={} vad={} ==\n",
                codec.name(),
                if vad { "on" } else { "off" }
            ));
            out.push_str(&format!("{:<14}{:<10}", "frontend", "fraction"));
            for seed in &plan.seeds {
                out.push_str(&format!("{:<11}", format!("seed{seed}")));
            }
            out.push_str("average\n");
            for &frontend in &plan.frontends {
                for fraction in frontend_fractions(plan, frontend) {
                    let row: Vec<&CellResult> = results
                        .iter()
                        .filter(|r| {
                            r.vad == vad
                                && r.codec == codec.name()
                                && r.frontend == frontend.as_str()
                                && r.fraction == fraction
                        })
                        .collect();
                    if row.is_empty() {
                        continue;
                    }
                    out.push_str(&format!(
                        "{:<14}{:<10}",
                        frontend.as_str(),
                        fraction_token(fraction)
                    ));
                    let mut eers = Vec::new();
                    for seed in &plan.seeds {
                        match row.iter().find(|r| r.seed == *seed) {
                            Some(r) => match r.eer {
                                Some(e) => {
                                    out.push_str(&format!("{:<11}", format!("{:.2}", 100.0 * e)));
                                    eers.push(e);
                                }
                                None => out.push_str(&format!("{:<11}", "failed")),
                            },
                            None => out.push_str(&format!("{:<11}", "-")),
                        }
                    }
                    if eers.is_empty() {
                        out.push_str("failed\n");
                    } else {
                        out.push_str(&format!(
                            "{:.2}\n",
                            100.0 * eers.iter().sum::<f64>() / eers.len() as f64
                        ));
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan(manifest: PathBuf) -> SweepPlan {
        SweepPlan {
            manifest,
            frontends: vec![FrontendKind::Baseline, FrontendKind::BandTrim],
            fractions: vec![0.5],
            seeds: vec![1, 10, 100],
            codecs: vec![CodecProfile::Clean, CodecProfile::G711Mulaw],
            vads: vec![false],
            bwe_kind: BweKind::Replicate,
            ridge_lambda: 1e-3,
            augment: None,
            batch_size: 8,
            epochs: 2,
            dev_fraction: 0.2,
            schedule: LrSchedule::default(),
        }
    }

    #[test]
    fn cell_enumeration_counts() {
        let plan = tiny_plan(PathBuf::from("unused.tsv"));
        let cells = enumerate_cells(&plan);
        // (baseline x 1 fraction-slot + band_trim x 1 fraction) x 3 seeds
        assert_eq!(cells.len(), 6);
        // 2 frontends x 1 fraction x 3 seeds x 2 codecs = 12 eval cells
        assert_eq!(cells.len() * plan.codecs.len(), 12);
    }

    #[test]
    fn cell_hash_depends_on_every_knob() {
        let plan = tiny_plan(PathBuf::from("unused.tsv"));
        let cell = TrainCell {
            frontend: FrontendKind::BandTrim,
            fraction: Some(0.5),
            vad: false,
            seed: 1,
        };
        let fe = frontend_config(&plan, &cell).unwrap();
        let h1 = cell_hash(&plan, &cell, "digest", &fe);
        let h2 = cell_hash(&plan, &cell, "digest2", &fe);
        assert_ne!(h1, h2);
        let other = TrainCell { seed: 10, ..cell.clone() };
        let fe2 = frontend_config(&plan, &other).unwrap();
        assert_ne!(h1, cell_hash(&plan, &other, "digest", &fe2));
        let mut plan2 = tiny_plan(PathBuf::from("unused.tsv"));
        plan2.epochs = 3;
        assert_ne!(h1, cell_hash(&plan2, &cell, "digest", &fe));
    }
}
