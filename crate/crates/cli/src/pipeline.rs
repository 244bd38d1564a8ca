//! Front-end pipeline: manifest handling and per-utterance featurization.
//!
//! Processing order per utterance: codec (evaluation-condition only) →
//! VAD (if on) → augmentation (train subset only) → front-end transform →
//! FBANK → band trim (band_trim only) → length normalization.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use sbcm::bwe::{self, BweExtender, BweInput};
use sbcm::channel::{self, AugmentConfig, CodecProfile, Label, Subset};
use sbcm::features::{self, FbankMatrix, LengthMode, MelFilterbank};
use sbcm::filters::{self, CutoffFraction};
use sbcm::rng::{derive_seed, hash_str, rng_from_seed, stream};
use sbcm::signal::AudioBuffer;

use crate::error::{CliError, Result};

/// Length-normalization target range in seconds.
pub const LENGTH_RANGE_S: (f64, f64) = (3.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontendKind {
    Baseline,
    BandTrim,
    Lowpass,
    LowpassBwe,
}

impl FrontendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrontendKind::Baseline => "baseline",
            FrontendKind::BandTrim => "band_trim",
            FrontendKind::Lowpass => "lowpass",
            FrontendKind::LowpassBwe => "lowpass_bwe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(FrontendKind::Baseline),
            "band_trim" => Some(FrontendKind::BandTrim),
            "lowpass" => Some(FrontendKind::Lowpass),
            "lowpass_bwe" => Some(FrontendKind::LowpassBwe),
            _ => None,
        }
    }

    pub fn needs_fraction(self) -> bool {
        self != FrontendKind::Baseline
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BweKind {
    Replicate,
    LinearRegressor,
}

impl BweKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BweKind::Replicate => "replicate",
            BweKind::LinearRegressor => "linear_regressor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "replicate" => Some(BweKind::Replicate),
            "linear_regressor" => Some(BweKind::LinearRegressor),
            _ => None,
        }
    }
}

/// One front-end configuration, as selected by flags or a sweep plan.
#[derive(Debug, Clone)]
pub struct FrontendConfig {
    pub kind: FrontendKind,
    pub fraction: Option<CutoffFraction>,
    pub bwe_kind: BweKind,
    pub vad: bool,
    /// `None` disables augmentation even for the train subset.
    pub augment: Option<AugmentConfig>,
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kind.needs_fraction() && self.fraction.is_none() {
            return Err(CliError::usage(format!(
                "front-end {} requires --fraction",
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    /// Stable description used in cache keys and tables.
    pub fn describe(&self) -> String {
        format!(
            "kind={} fraction={} bwe={} vad={} augment={}",
            self.kind.as_str(),
            self.fraction.map_or("-".into(), |f| format!("{}", f.get())),
            self.bwe_kind.as_str(),
            if self.vad { "on" } else { "off" },
            match &self.augment {
                None => "off".to_string(),
                Some(a) => format!(
                    "p={},snr={}..{},rt60={}..{},seed={}",
                    a.apply_probability,
                    a.snr_range_db.0,
                    a.snr_range_db.1,
                    a.reverb_rt60_range_s.0,
                    a.reverb_rt60_range_s.1,
                    a.seed
                ),
            }
        )
    }
}

/// One corpus manifest row: id, wav path relative to the manifest, label,
/// subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub rel_path: String,
    pub label: Label,
    pub subset: Subset,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open manifest {path:?}: {e}")))?;
    let reader = std::io::BufReader::new(file);
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(CliError::data(format!(
                "{}:{}: expected 4 tab-separated columns",
                path.display(),
                i + 1
            )));
        }
        let label = Label::parse(parts[2]).ok_or_else(|| {
            CliError::data(format!("{}:{}: unknown label {:?}", path.display(), i + 1, parts[2]))
        })?;
        let subset = Subset::parse(parts[3]).ok_or_else(|| {
            CliError::data(format!("{}:{}: unknown subset {:?}", path.display(), i + 1, parts[3]))
        })?;
        if !seen.insert(parts[0].to_string()) {
            return Err(CliError::data(format!(
                "{}:{}: duplicate utterance id {}",
                path.display(),
                i + 1,
                parts[0]
            )));
        }
        entries.push(ManifestEntry {
            utt_id: parts[0].to_string(),
            rel_path: parts[1].to_string(),
            label,
            subset,
        });
    }
    if entries.is_empty() {
        return Err(CliError::data(format!("manifest {} is empty", path.display())));
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in entries {
        writeln!(f, "{}\t{}\t{}\t{}", e.utt_id, e.rel_path, e.label.as_str(), e.subset.as_str())?;
    }
    Ok(())
}

/// Resolve a manifest-relative wav path.
pub fn wav_path(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    manifest.parent().unwrap_or_else(|| Path::new(".")).join(&entry.rel_path)
}

/// The full-band analysis filterbank every front-end shares.
pub fn default_filterbank() -> MelFilterbank {
    features::build_mel_filterbank(features::N_MELS, sbcm::signal::N_FFT, 16000, 0.0, 8000.0)
        .expect("default filterbank parameters are valid")
}

/// Featurize one utterance. Returns `None` when VAD flags it as all silence.
///
/// `augment_index` is the utterance's position within the train subset, which
/// keeps the draw identical to batch augmentation of that subset in manifest
/// order.
#[allow(clippy::too_many_arguments)]
pub fn featurize_utterance(
    audio: &AudioBuffer,
    utt_id: &str,
    subset: Subset,
    fe: &FrontendConfig,
    bank: &MelFilterbank,
    extender: Option<&BweExtender>,
    codec: Option<&CodecProfile>,
    seed: u64,
    augment_index: u64,
) -> Result<Option<FbankMatrix>> {
    let mut audio = match codec {
        Some(profile) => channel::apply_codec(audio, profile)?,
        None => audio.clone(),
    };

    if fe.vad {
        match features::vad_trim(&audio, features::VAD_TOP_DB, features::VAD_FRAME, features::VAD_HOP)
        {
            Ok(res) => audio = res.trimmed,
            Err(features::FeatureError::AllSilence { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        if audio.is_empty() {
            return Ok(None);
        }
    }

    if subset == Subset::Train {
        if let Some(aug) = &fe.augment {
            let mut rng = rng_from_seed(derive_seed(aug.seed, stream::AUGMENT, augment_index));
            audio = channel::augment_one(&audio, aug, &mut rng)?;
        }
    }

    let transformed = match fe.kind {
        FrontendKind::Baseline | FrontendKind::BandTrim => audio,
        FrontendKind::Lowpass => {
            let fraction = fe.fraction.expect("validated");
            filters::lowpass_frontend(&audio, fraction)?
        }
        FrontendKind::LowpassBwe => {
            let fraction = fe.fraction.expect("validated");
            let narrow = filters::lowpass_frontend(&audio, fraction)?;
            let input = BweInput::new(narrow, fraction);
            match fe.bwe_kind {
                BweKind::Replicate => bwe::extend(&input, &BweExtender::Replicate)?,
                BweKind::LinearRegressor => {
                    let ext = extender.ok_or_else(|| {
                        CliError::usage(
                            "lowpass_bwe with linear_regressor needs a trained bwe model",
                        )
                    })?;
                    bwe::extend(&input, ext)?
                }
            }
        }
    };

    let mut feats = features::fbank(&transformed, bank)?;
    if fe.kind == FrontendKind::BandTrim {
        let fraction = fe.fraction.expect("validated");
        let spec = features::trim_index(fraction, features::N_MELS, 8000.0)?;
        feats = features::trim_bands(&feats, &spec)?;
    }

    let mode = match subset {
        Subset::Train => LengthMode::Train,
        Subset::Dev | Subset::Eval => LengthMode::Eval,
    };
    let mut rng = rng_from_seed(derive_seed(seed, stream::LENGTH_NORM, hash_str(utt_id)));
    let feats = features::normalize_length(&feats, LENGTH_RANGE_S, mode, &mut rng)?;
    Ok(Some(feats))
}

/// Expected FBANK row count for a front-end.
pub fn frontend_feat_dim(fe: &FrontendConfig) -> Result<usize> {
    Ok(match fe.kind {
        FrontendKind::BandTrim => {
            let fraction = fe
                .fraction
                .ok_or_else(|| CliError::usage("band_trim requires --fraction"))?;
            features::trim_index(fraction, features::N_MELS, 8000.0)?.n_low
        }
        _ => features::N_MELS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sbcm::channel::{CorpusSpec, SplitSpec};

    fn test_corpus() -> Vec<channel::Utterance> {
        let spec = CorpusSpec {
            n_bonafide: 4,
            n_spoof: 4,
            duration_range_s: (0.5, 0.8),
            silence_pad_range_s: (0.1, 0.2),
            ..Default::default()
        };
        channel::generate_corpus(&spec, SplitSpec::default())
    }

    fn fe(kind: FrontendKind, fraction: f64, vad: bool) -> FrontendConfig {
        FrontendConfig {
            kind,
            fraction: if kind.needs_fraction() {
                Some(CutoffFraction::new(fraction).unwrap())
            } else {
                None
            },
            bwe_kind: BweKind::Replicate,
            vad,
            augment: None,
        }
    }

    #[test]
    fn manifest_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.tsv");
        let entries = vec![
            ManifestEntry {
                utt_id: "a".into(),
                rel_path: "wavs/a.wav".into(),
                label: Label::Bonafide,
                subset: Subset::Train,
            },
            ManifestEntry {
                utt_id: "b".into(),
                rel_path: "wavs/b.wav".into(),
                label: Label::Spoof,
                subset: Subset::Eval,
            },
        ];
        write_manifest(&entries, &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, entries);
        assert_eq!(
            wav_path(&path, &entries[0]),
            dir.path().join("wavs/a.wav")
        );

        std::fs::write(&path, "one\ttwo\tthree\n").unwrap();
        assert!(read_manifest(&path).is_err());
        std::fs::write(&path, "a\tx.wav\tbonafide\ttrain\na\ty.wav\tspoof\teval\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn baseline_featurize_equals_fbank_plus_length_norm() {
        let utts = test_corpus();
        let bank = default_filterbank();
        let cfg = fe(FrontendKind::Baseline, 0.0, false);
        for u in &utts {
            let got = featurize_utterance(
                &u.audio, &u.id, u.subset, &cfg, &bank, None, None, 42, 0,
            )
            .unwrap()
            .unwrap();
            let direct = features::fbank(&u.audio, &bank).unwrap();
            let mode = match u.subset {
                Subset::Train => LengthMode::Train,
                _ => LengthMode::Eval,
            };
            let mut rng = rng_from_seed(derive_seed(42, stream::LENGTH_NORM, hash_str(&u.id)));
            let direct =
                features::normalize_length(&direct, LENGTH_RANGE_S, mode, &mut rng).unwrap();
            assert_eq!(got, direct, "{}", u.id);
        }
    }

    #[test]
    fn band_trim_and_lowpass_feat_dims() {
        let utts = test_corpus();
        let bank = default_filterbank();
        let trim = fe(FrontendKind::BandTrim, 0.5, false);
        let got = featurize_utterance(
            &utts[0].audio, &utts[0].id, Subset::Eval, &trim, &bank, None, None, 1, 0,
        )
        .unwrap()
        .unwrap();
        assert_eq!(got.rows, 60);
        assert_eq!(got.cols, 500);
        assert_eq!(frontend_feat_dim(&trim).unwrap(), 60);

        let lp = fe(FrontendKind::Lowpass, 0.5, false);
        let got = featurize_utterance(
            &utts[0].audio, &utts[0].id, Subset::Eval, &lp, &bank, None, None, 1, 0,
        )
        .unwrap()
        .unwrap();
        assert_eq!(got.rows, 80);
        // high rows sit near the log floor after filtering
        let tail_mean: f64 =
            (70..80).map(|r| got.row(r).iter().sum::<f64>() / got.cols as f64).sum::<f64>() / 10.0;
        assert!(tail_mean < features::LOG_FLOOR.ln() + 4.0, "tail mean {tail_mean}");
    }

    #[test]
    fn lowpass_bwe_requires_model_for_regressor() {
        let utts = test_corpus();
        let bank = default_filterbank();
        let mut cfg = fe(FrontendKind::LowpassBwe, 0.5, false);
        cfg.bwe_kind = BweKind::LinearRegressor;
        let err = featurize_utterance(
            &utts[0].audio, &utts[0].id, Subset::Eval, &cfg, &bank, None, None, 1, 0,
        );
        assert!(err.is_err());
        cfg.bwe_kind = BweKind::Replicate;
        let ok = featurize_utterance(
            &utts[0].audio, &utts[0].id, Subset::Eval, &cfg, &bank, None, None, 1, 0,
        )
        .unwrap();
        assert!(ok.is_some());
    }

    #[test]
    fn vad_skips_all_silence() {
        let bank = default_filterbank();
        let silent = AudioBuffer::new(vec![0.0; 8000], 16000);
        let cfg = fe(FrontendKind::Baseline, 0.0, true);
        let got = featurize_utterance(
            &silent, "quiet", Subset::Eval, &cfg, &bank, None, None, 1, 0,
        )
        .unwrap();
        assert!(got.is_none());
    }

    #[test]
    fn featurize_is_deterministic_per_seed() {
        let utts = test_corpus();
        let bank = default_filterbank();
        let mut cfg = fe(FrontendKind::Baseline, 0.0, false);
        cfg.augment = Some(AugmentConfig { seed: 9, ..Default::default() });
        let u = &utts[0];
        let a = featurize_utterance(&u.audio, &u.id, Subset::Train, &cfg, &bank, None, None, 9, 3)
            .unwrap()
            .unwrap();
        let b = featurize_utterance(&u.audio, &u.id, Subset::Train, &cfg, &bank, None, None, 9, 3)
            .unwrap()
            .unwrap();
        assert_eq!(a, b);
        let c = featurize_utterance(&u.audio, &u.id, Subset::Train, &cfg, &bank, None, None, 9, 4)
            .unwrap()
            .unwrap();
        assert!(a.values != c.values || a.cols != c.cols);
    }
}
