//! Score files and equal-error-rate computation.
//!
//! The EER convention: `FAR(t)` is the fraction of spoof scores at or above
//! the threshold, `FRR(t)` the fraction of bonafide scores below it. Both
//! step functions are sampled at every distinct score and at the midpoints
//! between neighbors, joined piecewise-linearly in the threshold domain, and
//! the EER is the value where the interpolants cross (midpoint of the
//! touching segment when they coincide over an interval). The crossing value
//! depends only on the sampled step values, so the reported EER is exactly
//! invariant under any strictly increasing transform of the scores.

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::channel::Label;

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score set needs at least one bonafide and one spoof record")]
    SingleClass,
    #[error("no results to average")]
    Empty,
    #[error("relative reduction needs a positive baseline, got {0}")]
    NonPositiveBaseline(f64),
    #[error("score file {path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("duplicate utterance id {0}")]
    DuplicateId(String),
    #[error("non-finite score for utterance {0}")]
    NonFiniteScore(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One labeled detection score; higher means more bonafide.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utt_id: String,
    pub label: Label,
    pub score: f64,
}

/// A set of labeled scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub records: Vec<ScoreRecord>,
}

impl ScoreSet {
    pub fn push(&mut self, utt_id: impl Into<String>, label: Label, score: f64) {
        self.records.push(ScoreRecord { utt_id: utt_id.into(), label, score });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Equal error rate and the threshold it occurs at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

/// Fraction of spoof scores at or above `t`.
fn far_at(spoof_sorted: &[f64], t: f64) -> f64 {
    let below = spoof_sorted.partition_point(|&s| s < t);
    (spoof_sorted.len() - below) as f64 / spoof_sorted.len() as f64
}

/// Fraction of bonafide scores below `t`.
fn frr_at(bona_sorted: &[f64], t: f64) -> f64 {
    bona_sorted.partition_point(|&s| s < t) as f64 / bona_sorted.len() as f64
}

/// Compute the EER by walking the knot grid (distinct scores plus midpoints)
/// for the sign change of `FAR - FRR`.
pub fn compute_eer(scores: &ScoreSet) -> Result<EerResult> {
    let mut bona: Vec<f64> = Vec::new();
    let mut spoof: Vec<f64> = Vec::new();
    for r in &scores.records {
        if !r.score.is_finite() {
            return Err(EvalError::NonFiniteScore(r.utt_id.clone()));
        }
        match r.label {
            Label::Bonafide => bona.push(r.score),
            Label::Spoof => spoof.push(r.score),
        }
    }
    if bona.is_empty() || spoof.is_empty() {
        return Err(EvalError::SingleClass);
    }
    bona.sort_unstable_by(f64::total_cmp);
    spoof.sort_unstable_by(f64::total_cmp);

    let mut distinct: Vec<f64> = bona.iter().chain(spoof.iter()).copied().collect();
    distinct.sort_unstable_by(f64::total_cmp);
    distinct.dedup();
    let mut knots = Vec::with_capacity(2 * distinct.len() + 1);
    for (i, &s) in distinct.iter().enumerate() {
        knots.push(s);
        if i + 1 < distinct.len() {
            knots.push(0.5 * (s + distinct[i + 1]));
        }
    }
    // sentinel beyond the largest score, where FAR = 0 and FRR = 1
    knots.push(distinct[distinct.len() - 1] + 1.0);

    let values: Vec<(f64, f64, f64)> = knots
        .iter()
        .map(|&t| {
            let far = far_at(&spoof, t);
            let frr = frr_at(&bona, t);
            (t, far, frr)
        })
        .collect();

    // FAR - FRR is non-increasing, from +1 at the minimum score; find where
    // it reaches zero or changes sign
    let mut prev = values[0];
    for &(t, far, frr) in &values {
        let diff = far - frr;
        if diff == 0.0 {
            // touching segment: FAR and FRR are both constant on it; report
            // the midpoint of the zero-diff span
            let start = t;
            let mut end = t;
            let mut level = far;
            for &(t2, far2, frr2) in values.iter().filter(|v| v.0 >= t) {
                if far2 - frr2 == 0.0 {
                    end = t2;
                    level = far2;
                } else {
                    break;
                }
            }
            return Ok(EerResult {
                eer: level,
                threshold: 0.5 * (start + end),
                n_bonafide: bona.len(),
                n_spoof: spoof.len(),
            });
        }
        if diff < 0.0 {
            let (t0, far0, frr0) = prev;
            let d0 = far0 - frr0;
            let d1 = diff;
            let s = d0 / (d0 - d1);
            let eer = far0 + s * (far - far0);
            let threshold = t0 + s * (t - t0);
            return Ok(EerResult {
                eer,
                threshold,
                n_bonafide: bona.len(),
                n_spoof: spoof.len(),
            });
        }
        prev = (t, far, frr);
    }
    unreachable!("the sentinel knot forces FAR - FRR negative");
}

/// Arithmetic mean of per-seed EERs.
pub fn seed_average(results: &[EerResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(results.iter().map(|r| r.eer).sum::<f64>() / results.len() as f64)
}

/// Convenience for averaging plain EER values.
pub fn mean_eer(eers: &[f64]) -> Result<f64> {
    if eers.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(eers.iter().sum::<f64>() / eers.len() as f64)
}

/// `(baseline - system) / baseline`.
pub fn relative_reduction(baseline_eer: f64, system_eer: f64) -> Result<f64> {
    if baseline_eer <= 0.0 {
        return Err(EvalError::NonPositiveBaseline(baseline_eer));
    }
    Ok((baseline_eer - system_eer) / baseline_eer)
}

/// Write the score TSV: `utt_id<TAB>label<TAB>score`, scores with 9
/// significant digits.
pub fn write_scores(set: &ScoreSet, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in &set.records {
        writeln!(f, "{}\t{}\t{:.8e}", r.utt_id, r.label.as_str(), r.score)?;
    }
    Ok(())
}

/// Read a score TSV written by [`write_scores`].
pub fn read_scores(path: &Path) -> Result<ScoreSet> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut set = ScoreSet::default();
    let mut seen = std::collections::HashSet::new();
    let path_str = path.display().to_string();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(id), Some(label), Some(score)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(EvalError::Parse {
                path: path_str,
                line: i + 1,
                message: "expected utt_id<TAB>label<TAB>score".into(),
            });
        };
        let label = Label::parse(label).ok_or_else(|| EvalError::Parse {
            path: path_str.clone(),
            line: i + 1,
            message: format!("unknown label token {label:?}"),
        })?;
        let score: f64 = score.parse().map_err(|_| EvalError::Parse {
            path: path_str.clone(),
            line: i + 1,
            message: format!("non-numeric score {score:?}"),
        })?;
        if !seen.insert(id.to_string()) {
            return Err(EvalError::DuplicateId(id.to_string()));
        }
        set.push(id, label, score);
    }
    if set.is_empty() {
        return Err(EvalError::SingleClass);
    }
    Ok(set)
}
