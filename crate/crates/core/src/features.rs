//! Mel filterbank construction, FBANK extraction, band trimming, length
//! normalization, and energy-based voice activity detection.
//!
//! The mel scale is HTK-style, `mel(f) = 2595 log10(1 + f/700)`; the trim
//! index formula is exactly base-invariant under it, which is what keeps the
//! trim table `{37, 47, 54, 60, 65, 69}` stable.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::filters::CutoffFraction;
use crate::signal::{self, AudioBuffer};

/// Number of mel filters in the full-band FBANK.
pub const N_MELS: usize = 80;
/// Natural-log floor applied to filterbank energies.
pub const LOG_FLOOR: f64 = 1e-10;
/// Analysis hop for FBANK extraction, in samples.
pub const FBANK_HOP: usize = 128;

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("f_min {f_min} must be below f_max {f_max}, and f_max at most Nyquist {nyquist}")]
    BadBandLimits { f_min: f64, f_max: f64, nyquist: f64 },
    #[error("need at least one mel filter")]
    NoFilters,
    #[error("mel row {0} covers no FFT bin; reduce n_mels or raise n_fft")]
    EmptyMelRow(usize),
    #[error("buffer sample rate {got} does not match filterbank design rate {expected}")]
    SampleRateMismatch { got: u32, expected: u32 },
    #[error("trim would keep {n_low} rows but features have only {rows}")]
    TrimExceedsRows { n_low: usize, rows: usize },
    #[error("trim index is zero at fraction {0}")]
    ZeroTrimIndex(f64),
    #[error("features are empty")]
    EmptyFeatures,
    #[error("all-silence utterance: no frame within {top_db} dB of the maximum")]
    AllSilence { top_db: f64 },
    #[error("feature file {0}: bad magic (expected FBNK)")]
    BadMagic(String),
    #[error("feature file {0}: unsupported version {1}")]
    BadVersion(String, u32),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10.0f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank over FFT-bin center frequencies, peak weight 1.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Dense weights, `n_mels x (n_fft/2 + 1)`, row-major.
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub n_fft: usize,
    pub sample_rate: u32,
    pub f_min: f64,
    pub f_max: f64,
    /// `n_mels + 2` triangle breakpoints in Hz, uniform on the mel axis.
    pub breakpoints: Vec<f64>,
    /// Per-row range of bins with nonzero weight.
    support: Vec<std::ops::Range<usize>>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Center frequency (Hz) of row `m`.
    pub fn center_hz(&self, m: usize) -> f64 {
        self.breakpoints[m + 1]
    }
}

/// Build the filterbank: `n_mels + 2` breakpoints uniformly spaced on the mel
/// axis, mapped back to Hz, triangles evaluated at FFT-bin centers.
pub fn build_mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels == 0 {
        return Err(FeatureError::NoFilters);
    }
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(FeatureError::BadBandLimits { f_min, f_max, nyquist });
    }
    let n_bins = n_fft / 2 + 1;
    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let breakpoints: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut weights = vec![0.0; n_mels * n_bins];
    let mut support = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (left, center, right) = (breakpoints[m], breakpoints[m + 1], breakpoints[m + 2]);
        let mut first = usize::MAX;
        let mut last = 0;
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            if f <= left || f >= right {
                continue;
            }
            let w = if f <= center {
                (f - left) / (center - left)
            } else {
                (right - f) / (right - center)
            };
            if w > 0.0 {
                weights[m * n_bins + k] = w;
                first = first.min(k);
                last = k;
            }
        }
        if first == usize::MAX {
            return Err(FeatureError::EmptyMelRow(m));
        }
        support.push(first..last + 1);
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        n_fft,
        sample_rate,
        f_min,
        f_max,
        breakpoints,
        support,
    })
}

/// Frame timing carried alongside FBANK values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameMeta {
    pub hop: u32,
    pub sample_rate: u32,
}

impl FrameMeta {
    pub fn frames_per_second(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }
}

impl Default for FrameMeta {
    fn default() -> Self {
        Self { hop: FBANK_HOP as u32, sample_rate: 16000 }
    }
}

/// Log mel-filterbank energies: `rows x cols` (mel bands by frames).
#[derive(Debug, Clone, PartialEq)]
pub struct FbankMatrix {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub meta: FrameMeta,
}

impl FbankMatrix {
    pub fn new(values: Vec<f64>, rows: usize, cols: usize, meta: FrameMeta) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { values, rows, cols, meta }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    /// Column `c` gathered into a vector (one frame across all bands).
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    /// Round every value through f32, matching the on-disk representation.
    pub fn round_to_f32(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
            rows: self.rows,
            cols: self.cols,
            meta: self.meta,
        }
    }
}

/// FBANK: power spectrum per frame, mel-weighted, floored at 1e-10, natural log.
pub fn fbank(buffer: &AudioBuffer, bank: &MelFilterbank) -> Result<FbankMatrix> {
    if buffer.sample_rate != bank.sample_rate {
        return Err(FeatureError::SampleRateMismatch {
            got: buffer.sample_rate,
            expected: bank.sample_rate,
        });
    }
    let spec = signal::stft(buffer, bank.n_fft, FBANK_HOP)?;
    let t_frames = spec.n_frames();
    let mut values = vec![0.0; bank.n_mels * t_frames];
    let mut power = vec![0.0; bank.n_bins];
    for t in 0..t_frames {
        for (p, v) in power.iter_mut().zip(spec.frame(t)) {
            *p = v.norm_sqr();
        }
        for m in 0..bank.n_mels {
            let range = bank.support[m].clone();
            let row = &bank.row(m)[range.clone()];
            let mut acc = 0.0;
            for (w, p) in row.iter().zip(&power[range]) {
                acc += w * p;
            }
            values[m * t_frames + t] = acc.max(LOG_FLOOR).ln();
        }
    }
    Ok(FbankMatrix::new(
        values,
        bank.n_mels,
        t_frames,
        FrameMeta { hop: FBANK_HOP as u32, sample_rate: buffer.sample_rate },
    ))
}

/// Band-trim parameters derived from a cutoff fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimSpec {
    pub fraction: CutoffFraction,
    /// Number of FBANK rows retained.
    pub n_low: usize,
    /// Frequency the floored index actually corresponds to, in Hz.
    pub f_low_effective: f64,
}

/// Number of low-band FBANK dimensions for a cutoff:
/// `n_low = floor(n_full * ln(1 + f_L/700) / ln(1 + f_F/700))`, with the
/// effective cutoff mapped back through the inverse at the floored index.
pub fn trim_index(fraction: CutoffFraction, n_full: usize, f_full: f64) -> Result<TrimSpec> {
    let f_low = fraction.get() * f_full;
    let ratio = (1.0 + f_low / 700.0).ln() / (1.0 + f_full / 700.0).ln();
    let n_low = (n_full as f64 * ratio).floor() as usize;
    if n_low == 0 {
        return Err(FeatureError::ZeroTrimIndex(fraction.get()));
    }
    let f_low_effective =
        700.0 * ((1.0 + f_full / 700.0).powf(n_low as f64 / n_full as f64) - 1.0);
    Ok(TrimSpec { fraction, n_low, f_low_effective })
}

/// Keep rows `0..n_low`, bit-identical to the input rows; frames unchanged.
pub fn trim_bands(features: &FbankMatrix, spec: &TrimSpec) -> Result<FbankMatrix> {
    if spec.n_low > features.rows {
        return Err(FeatureError::TrimExceedsRows { n_low: spec.n_low, rows: features.rows });
    }
    let values = features.values[..spec.n_low * features.cols].to_vec();
    Ok(FbankMatrix::new(values, spec.n_low, features.cols, features.meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthMode {
    /// Per-utterance random target in the configured range, random offset.
    Train,
    /// Fixed target at the range midpoint, zero offset.
    Eval,
}

/// Truncate or self-concatenate along time to a target duration drawn from
/// `range_s` (train) or fixed at its midpoint (eval).
pub fn normalize_length(
    features: &FbankMatrix,
    range_s: (f64, f64),
    mode: LengthMode,
    rng: &mut ChaCha8Rng,
) -> Result<FbankMatrix> {
    if features.cols == 0 || features.rows == 0 {
        return Err(FeatureError::EmptyFeatures);
    }
    let fps = features.meta.frames_per_second();
    let secs = match mode {
        LengthMode::Train => rng.gen_range(range_s.0..=range_s.1),
        LengthMode::Eval => 0.5 * (range_s.0 + range_s.1),
    };
    let target = ((secs * fps).round() as usize).max(1);
    let t_in = features.cols;
    let offset = if t_in > target {
        match mode {
            LengthMode::Train => rng.gen_range(0..=t_in - target),
            LengthMode::Eval => 0,
        }
    } else {
        0
    };
    let mut values = vec![0.0; features.rows * target];
    for r in 0..features.rows {
        let src = features.row(r);
        let dst = &mut values[r * target..(r + 1) * target];
        for (c, slot) in dst.iter_mut().enumerate() {
            *slot = src[(offset + c) % t_in];
        }
    }
    Ok(FbankMatrix::new(values, features.rows, target, features.meta))
}

/// Result of energy-based silence trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct VadResult {
    pub start: usize,
    /// Exclusive end index.
    pub end: usize,
    pub trimmed: AudioBuffer,
}

/// Default VAD threshold in dB below the loudest frame.
pub const VAD_TOP_DB: f64 = 40.0;
/// Default VAD analysis frame length in samples.
pub const VAD_FRAME: usize = 2048;
/// Default VAD analysis hop in samples.
pub const VAD_HOP: usize = 512;

/// Trim leading and trailing frames whose power is more than `top_db` below
/// the loudest frame. Frames are centered at multiples of `hop` (zero-padded
/// at the edges); reported boundaries are frame centers, so they land on hop
/// multiples and trimming is idempotent.
pub fn vad_trim(buffer: &AudioBuffer, top_db: f64, frame: usize, hop: usize) -> Result<VadResult> {
    if buffer.is_empty() {
        return Err(FeatureError::Signal(signal::SignalError::EmptyBuffer));
    }
    assert!(hop > 0 && frame > 0, "vad frame/hop must be positive");
    let len = buffer.len();
    let half = frame / 2;
    let t_max = (len - 1 + half) / hop;
    let mut powers = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let center = t * hop;
        let lo = center.saturating_sub(half);
        let hi = (center + half).min(len);
        let mut acc = 0.0;
        for &x in &buffer.samples[lo..hi] {
            acc += x * x;
        }
        powers.push(acc / frame as f64);
    }
    let max_power = powers.iter().copied().fold(0.0, f64::max);
    if max_power <= 0.0 {
        return Err(FeatureError::AllSilence { top_db });
    }
    let threshold = max_power * 10.0f64.powf(-top_db / 10.0);
    let keep: Vec<usize> = (0..powers.len()).filter(|&t| powers[t] > threshold).collect();
    let first = *keep.first().ok_or(FeatureError::AllSilence { top_db })?;
    let last = *keep.last().unwrap();
    let start = (first * hop).min(len);
    let end = (last * hop).min(len).max(start);
    let trimmed = AudioBuffer::new(buffer.samples[start..end].to_vec(), buffer.sample_rate);
    Ok(VadResult { start, end, trimmed })
}

/// Write the `FBNK` feature file: magic, u32 version 1, u32 rows, u32 cols,
/// f32 little-endian row-major payload.
pub fn write_fbnk(features: &FbankMatrix, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(b"FBNK")?;
    file.write_u32::<LittleEndian>(1)?;
    file.write_u32::<LittleEndian>(features.rows as u32)?;
    file.write_u32::<LittleEndian>(features.cols as u32)?;
    for &v in &features.values {
        file.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

/// Read an `FBNK` feature file written by [`write_fbnk`].
pub fn read_fbnk(path: &Path) -> Result<FbankMatrix> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != b"FBNK" {
        return Err(FeatureError::BadMagic(path.display().to_string()));
    }
    let version = file.read_u32::<LittleEndian>()?;
    if version != 1 {
        return Err(FeatureError::BadVersion(path.display().to_string(), version));
    }
    let rows = file.read_u32::<LittleEndian>()? as usize;
    let cols = file.read_u32::<LittleEndian>()? as usize;
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        values.push(f64::from(file.read_f32::<LittleEndian>()?));
    }
    Ok(FbankMatrix::new(values, rows, cols, FrameMeta::default()))
}
