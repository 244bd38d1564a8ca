//! Data augmentation, telephony codec simulation, and synthetic corpus
//! generation.
//!
//! The corpus generator stands in for a real spoofing database at desk
//! scale. Spoofed utterances carry two injected artifact families: an
//! inharmonic tone cluster inside 2-3.8 kHz (survives codecs and low-pass
//! front-ends) and mirrored-harmonic components above 6 kHz (destroyed by a
//! telephony path). Both run through the leading/trailing silence pads, so
//! silence is informative until a VAD removes it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::filters::{self, FilterSpec};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::signal::{self, AudioBuffer};

pub type Result<T> = std::result::Result<T, ChannelError>;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("clean signal has zero power; SNR is undefined")]
    ZeroPowerClean,
    #[error("noise signal has zero power; SNR scaling is undefined")]
    ZeroPowerNoise,
    #[error("noise/rir buffer is empty")]
    EmptyNoise,
    #[error("codec requires 16 kHz input, got {0} Hz")]
    UnsupportedRate(u32),
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Filter(#[from] filters::FilterError),
}

/// Bonafide-vs-spoof ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Bonafide,
    Spoof,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bonafide" => Some(Label::Bonafide),
            "spoof" => Some(Label::Spoof),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subset {
    Train,
    Dev,
    Eval,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Dev => "dev",
            Subset::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Subset::Train),
            "dev" => Some(Subset::Dev),
            "eval" => Some(Subset::Eval),
            _ => None,
        }
    }
}

/// One labeled utterance of a corpus.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub audio: AudioBuffer,
    pub label: Label,
    pub subset: Subset,
}

/// Noise/reverb augmentation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub apply_probability: f64,
    pub snr_range_db: (f64, f64),
    pub reverb_rt60_range_s: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            apply_probability: 2.0 / 3.0,
            snr_range_db: (5.0, 20.0),
            reverb_rt60_range_s: (0.1, 0.5),
            seed: 0,
        }
    }
}

/// Transmission-channel simulation applied to evaluation audio.
#[derive(Debug, Clone, PartialEq)]
pub enum CodecProfile {
    /// Identity.
    Clean,
    /// 16k -> 8k -> mu-law 8-bit -> 16k telephony path.
    G711Mulaw,
    /// Chebyshev low-pass plus a white noise floor.
    Bandlimit { cutoff_hz: f64, noise_floor_db: f64, seed: u64 },
}

impl CodecProfile {
    pub fn name(&self) -> &'static str {
        match self {
            CodecProfile::Clean => "clean",
            CodecProfile::G711Mulaw => "g711_mulaw",
            CodecProfile::Bandlimit { .. } => "bandlimit",
        }
    }

    /// Parse a profile name; `bandlimit` takes defaults of 3400 Hz and 30 dB.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clean" => Some(CodecProfile::Clean),
            "g711_mulaw" => Some(CodecProfile::G711Mulaw),
            "bandlimit" => {
                Some(CodecProfile::Bandlimit { cutoff_hz: 3400.0, noise_floor_db: 30.0, seed: 0 })
            }
            _ => None,
        }
    }
}

/// Synthetic corpus layout and artifact strengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub n_bonafide: usize,
    pub n_spoof: usize,
    pub duration_range_s: (f64, f64),
    pub sample_rate: u32,
    /// Amplitude of the 2-3.8 kHz tone cluster, relative to voiced RMS.
    pub low_band_strength: f64,
    /// Amplitude of the mirrored harmonics above 6 kHz, relative to voiced RMS.
    pub high_band_strength: f64,
    pub silence_pad_range_s: (f64, f64),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_bonafide: 100,
            n_spoof: 100,
            duration_range_s: (2.0, 4.0),
            sample_rate: 16000,
            low_band_strength: 0.65,
            high_band_strength: 0.45,
            silence_pad_range_s: (0.3, 0.7),
            seed: 1,
        }
    }
}

/// Train/dev/eval proportions for corpus generation, applied per label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub dev: f64,
    pub eval: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.6, dev: 0.2, eval: 0.2 }
    }
}

/// Scale `noise` to the requested SNR (capped at 100 dB) and add it to
/// `clean`; the noise is tiled or truncated to the clean length.
pub fn add_noise(clean: &AudioBuffer, noise: &AudioBuffer, snr_db: f64) -> Result<AudioBuffer> {
    if noise.is_empty() {
        return Err(ChannelError::EmptyNoise);
    }
    let p_clean = clean.samples.iter().map(|x| x * x).sum::<f64>() / clean.len().max(1) as f64;
    if p_clean <= 0.0 {
        return Err(ChannelError::ZeroPowerClean);
    }
    let snr = snr_db.min(100.0);
    let tiled: Vec<f64> = (0..clean.len()).map(|i| noise.samples[i % noise.len()]).collect();
    let p_noise = tiled.iter().map(|x| x * x).sum::<f64>() / tiled.len().max(1) as f64;
    if p_noise <= 0.0 {
        return Err(ChannelError::ZeroPowerNoise);
    }
    let scale = (p_clean / (p_noise * 10.0f64.powf(snr / 10.0))).sqrt();
    let samples = clean
        .samples
        .iter()
        .zip(&tiled)
        .map(|(c, n)| c + scale * n)
        .collect();
    Ok(AudioBuffer::new(samples, clean.sample_rate))
}

/// Convolve with a room impulse response, truncate to the dry length, and
/// renormalize to the dry signal's peak.
pub fn add_reverb(dry: &AudioBuffer, rir: &AudioBuffer) -> Result<AudioBuffer> {
    if rir.is_empty() {
        return Err(ChannelError::EmptyNoise);
    }
    let mut wet = fft_convolve(&dry.samples, &rir.samples);
    wet.truncate(dry.len());
    let dry_peak = dry.peak();
    let wet_peak = wet.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if dry_peak > 0.0 && wet_peak > 0.0 {
        let scale = dry_peak / wet_peak;
        for x in &mut wet {
            *x *= scale;
        }
    }
    Ok(AudioBuffer::new(wet, dry.sample_rate))
}

/// Linear convolution via zero-padded FFT.
fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    use num_complex::Complex64;
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = signal::fft(
        &a.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(),
        n,
    )
    .expect("power-of-two fft");
    let fb = signal::fft(
        &b.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(),
        n,
    )
    .expect("power-of-two fft");
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let time = signal::ifft(&prod, n).expect("power-of-two ifft");
    time[..out_len].iter().map(|c| c.re).collect()
}

/// Exponentially decaying noise burst: white noise under an
/// `exp(-6.908 t / rt60)` envelope (60 dB decay over `rt60`), 1.5x rt60 long,
/// normalized to unit peak.
pub fn synth_rir(rt60_s: f64, sample_rate: u32, rng: &mut ChaCha8Rng) -> AudioBuffer {
    assert!(rt60_s > 0.0, "rt60 must be positive");
    let len = ((1.5 * rt60_s * sample_rate as f64).round() as usize).max(8);
    let decay = 6.908 / rt60_s;
    let mut samples: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            rng.gen_range(-1.0..1.0) * (-decay * t).exp()
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        for x in &mut samples {
            *x /= peak;
        }
    }
    AudioBuffer::new(samples, sample_rate)
}

/// Synthetic noise bank entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NoiseKind {
    White,
    Pink,
    Babble,
}

fn make_noise(kind: NoiseKind, len: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> AudioBuffer {
    let samples = match kind {
        NoiseKind::White => (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        NoiseKind::Pink => pink_noise(len, rng),
        NoiseKind::Babble => babble_noise(len, sample_rate, rng),
    };
    AudioBuffer::new(samples, sample_rate)
}

/// 1/f-amplitude shaping of white noise in the frequency domain.
fn pink_noise(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use num_complex::Complex64;
    let n = len.next_power_of_two().max(2);
    let white: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let mut spec = signal::fft(&white, n).expect("power-of-two fft");
    spec[0] = Complex64::new(0.0, 0.0);
    for (k, v) in spec.iter_mut().enumerate().skip(1) {
        let f = k.min(n - k) as f64;
        *v *= 1.0 / f.sqrt();
    }
    let time = signal::ifft(&spec, n).expect("power-of-two ifft");
    let mut out: Vec<f64> = time[..len].iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        for x in &mut out {
            *x /= rms;
        }
    }
    out
}

/// Crowd-like noise: a few amplitude-modulated harmonic voices summed.
fn babble_noise(len: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let sr = sample_rate as f64;
    for _ in 0..6 {
        let f0 = rng.gen_range(100.0..300.0);
        let mod_rate = rng.gen_range(2.0..5.0);
        let mod_phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let phases: Vec<f64> =
            (0..8).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        for (i, slot) in out.iter_mut().enumerate() {
            let t = i as f64 / sr;
            let env = 0.5 + 0.5 * (std::f64::consts::TAU * mod_rate * t + mod_phase).sin();
            let mut v = 0.0;
            for (h, &ph) in phases.iter().enumerate() {
                let k = (h + 1) as f64;
                v += (std::f64::consts::TAU * k * f0 * t + ph).sin() / k;
            }
            *slot += env * v;
        }
    }
    let rms = (out.iter().map(|x| x * x).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        for x in &mut out {
            *x /= rms;
        }
    }
    out
}

/// Augment one utterance in place using its private generator. Exposed so
/// streaming callers can reproduce [`augment_batch`] item by item.
pub fn augment_one(audio: &AudioBuffer, cfg: &AugmentConfig, rng: &mut ChaCha8Rng) -> Result<AudioBuffer> {
    if !rng.gen_bool(cfg.apply_probability.clamp(0.0, 1.0)) {
        return Ok(audio.clone());
    }
    let mode = rng.gen_range(0..3u8); // 0 noise, 1 reverb, 2 both
    let mut out = audio.clone();
    if mode == 1 || mode == 2 {
        let rt60 = rng.gen_range(cfg.reverb_rt60_range_s.0..=cfg.reverb_rt60_range_s.1);
        let rir = synth_rir(rt60, audio.sample_rate, rng);
        out = add_reverb(&out, &rir)?;
    }
    if mode == 0 || mode == 2 {
        let kind = match rng.gen_range(0..3u8) {
            0 => NoiseKind::White,
            1 => NoiseKind::Pink,
            _ => NoiseKind::Babble,
        };
        let snr = rng.gen_range(cfg.snr_range_db.0..=cfg.snr_range_db.1);
        let noise = make_noise(kind, out.len(), out.sample_rate, rng);
        out = add_noise(&out, &noise, snr)?;
    }
    Ok(out)
}

/// Per-utterance Bernoulli(apply_probability) augmentation with noise-only,
/// reverb-only, or both; labels, ids, and subsets are untouched.
pub fn augment_batch(utts: &[Utterance], cfg: &AugmentConfig) -> Result<Vec<Utterance>> {
    utts.iter()
        .enumerate()
        .map(|(i, utt)| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, stream::AUGMENT, i as u64));
            let audio = augment_one(&utt.audio, cfg, &mut rng)?;
            Ok(Utterance { id: utt.id.clone(), audio, label: utt.label, subset: utt.subset })
        })
        .collect()
}

/// mu-law compression of one sample: `sgn(x) ln(1 + mu|x|) / ln(1 + mu)`.
/// Inputs are clipped to [-1, 1] first.
pub fn mulaw_compand(x: f64, mu: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    let mag = (1.0 + mu * x.abs()).ln() / (1.0 + mu).ln();
    if x < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Inverse of [`mulaw_compand`].
pub fn mulaw_expand(y: f64, mu: f64) -> f64 {
    let y = y.clamp(-1.0, 1.0);
    let mag = ((1.0 + mu).powf(y.abs()) - 1.0) / mu;
    if y < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Snap a companded value to the nearest of 256 uniform levels on [-1, 1].
pub fn quantize_8bit(y: f64) -> f64 {
    let level = ((y.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round();
    level / 255.0 * 2.0 - 1.0
}

/// Full per-sample codec core: compand, 8-bit quantize, expand.
pub fn mulaw_roundtrip(x: f64, mu: f64) -> f64 {
    mulaw_expand(quantize_8bit(mulaw_compand(x, mu)), mu)
}

/// Apply a transmission profile to 16 kHz audio. Output is at 16 kHz with
/// the input length restored exactly.
pub fn apply_codec(buffer: &AudioBuffer, profile: &CodecProfile) -> Result<AudioBuffer> {
    match profile {
        CodecProfile::Clean => Ok(buffer.clone()),
        CodecProfile::G711Mulaw => {
            if buffer.sample_rate != 16000 {
                return Err(ChannelError::UnsupportedRate(buffer.sample_rate));
            }
            let narrow = signal::resample(buffer, 8000)?;
            let coded: Vec<f64> =
                narrow.samples.iter().map(|&x| mulaw_roundtrip(x, 255.0)).collect();
            let wide = signal::resample(&AudioBuffer::new(coded, 8000), 16000)?;
            let mut samples = wide.samples;
            samples.resize(buffer.len(), 0.0);
            Ok(AudioBuffer::new(samples, 16000))
        }
        CodecProfile::Bandlimit { cutoff_hz, noise_floor_db, seed } => {
            let spec = FilterSpec {
                order: 8,
                ripple_db: 0.05,
                cutoff_hz: *cutoff_hz,
                sample_rate: buffer.sample_rate,
            };
            let filter = filters::design_cheby1(&spec)?;
            let filtered = filters::sosfilt(&filter, buffer)?;
            let mut rng = rng_from_seed(derive_seed(*seed, stream::CODEC_NOISE, 0));
            let scale = filtered.rms() * 10.0f64.powf(-noise_floor_db / 20.0);
            let samples = filtered
                .samples
                .iter()
                .map(|&x| x + scale * rng.gen_range(-1.0..1.0))
                .collect();
            Ok(AudioBuffer::new(samples, buffer.sample_rate))
        }
    }
}

/// Streaming generator for the synthetic corpus; utterance `i` is a pure
/// function of `(spec, split, i)`.
#[derive(Debug, Clone)]
pub struct CorpusGenerator {
    pub spec: CorpusSpec,
    pub split: SplitSpec,
}

impl CorpusGenerator {
    pub fn new(spec: CorpusSpec, split: SplitSpec) -> Self {
        Self { spec, split }
    }

    pub fn len(&self) -> usize {
        self.spec.n_bonafide + self.spec.n_spoof
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset_of(&self, index_in_label: usize, n_label: usize) -> (Subset, usize) {
        let n_train = (n_label as f64 * self.split.train).floor() as usize;
        let n_dev = (n_label as f64 * self.split.dev).floor() as usize;
        if index_in_label < n_train {
            (Subset::Train, index_in_label)
        } else if index_in_label < n_train + n_dev {
            (Subset::Dev, index_in_label - n_train)
        } else {
            (Subset::Eval, index_in_label - n_train - n_dev)
        }
    }

    /// Generate utterance `i`; bonafide occupy `0..n_bonafide`, spoof the rest.
    pub fn generate(&self, i: usize) -> Utterance {
        assert!(i < self.len());
        let (label, j, n_label) = if i < self.spec.n_bonafide {
            (Label::Bonafide, i, self.spec.n_bonafide)
        } else {
            (Label::Spoof, i - self.spec.n_bonafide, self.spec.n_spoof)
        };
        let (subset, k) = self.subset_of(j, n_label);
        let id = format!("synth-{}-{}-{}", subset.as_str(), label.as_str(), k);
        let audio = synth_utterance(&self.spec, label, j);
        Utterance { id, audio, label, subset }
    }
}

/// Generate the whole corpus eagerly. Prefer [`CorpusGenerator::generate`]
/// when streaming to disk.
pub fn generate_corpus(spec: &CorpusSpec, split: SplitSpec) -> Vec<Utterance> {
    let generator = CorpusGenerator::new(*spec, split);
    (0..generator.len()).map(|i| generator.generate(i)).collect()
}

/// Harmonic source-filter voice with syllable-rate amplitude modulation.
/// Spoofed utterances share the bonafide base (paired by in-label index) and
/// add the two artifact families from an independent random stream.
fn synth_utterance(spec: &CorpusSpec, label: Label, index_in_label: usize) -> AudioBuffer {
    let sr = spec.sample_rate as f64;
    let mut base_rng =
        rng_from_seed(derive_seed(spec.seed, stream::CORPUS_VOICE, index_in_label as u64));

    let dur = base_rng.gen_range(spec.duration_range_s.0..=spec.duration_range_s.1);
    let pad_lead = base_rng.gen_range(spec.silence_pad_range_s.0..=spec.silence_pad_range_s.1);
    let pad_tail = base_rng.gen_range(spec.silence_pad_range_s.0..=spec.silence_pad_range_s.1);
    let f0 = base_rng.gen_range(80.0..300.0);
    let formants: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                base_rng.gen_range(300.0..3400.0),
                base_rng.gen_range(100.0..500.0),
                base_rng.gen_range(0.5..1.0),
            )
        })
        .collect();
    let am_rate = base_rng.gen_range(2.0..5.0);
    let am_phase = base_rng.gen_range(0.0..std::f64::consts::TAU);

    let n_harm = (7800.0_f64 / f0).floor() as usize;
    let harmonics: Vec<(f64, f64, f64)> = (1..=n_harm)
        .map(|k| {
            let f = k as f64 * f0;
            let resonance: f64 = formants
                .iter()
                .map(|&(fc, bw, amp)| amp * bw * bw / ((f - fc) * (f - fc) + bw * bw))
                .sum();
            let tilt = 1.0 / (1.0 + (f / 2500.0) * (f / 2500.0)).sqrt();
            let amp = (resonance + 0.05) * tilt;
            let phase = base_rng.gen_range(0.0..std::f64::consts::TAU);
            (f, amp, phase)
        })
        .collect();

    let total = ((pad_lead + dur + pad_tail) * sr).round() as usize;
    let voiced_start = (pad_lead * sr).round() as usize;
    let voiced_end = (((pad_lead + dur) * sr).round() as usize).min(total);
    let ramp = (0.01 * sr) as usize; // 10 ms edge ramps

    let mut samples = vec![0.0f64; total];
    for i in voiced_start..voiced_end {
        let t = i as f64 / sr;
        let mut v = 0.0;
        for &(f, amp, phase) in &harmonics {
            v += amp * (std::f64::consts::TAU * f * t + phase).sin();
        }
        let am = 0.55 + 0.45 * (std::f64::consts::TAU * am_rate * t + am_phase).sin();
        let mut edge = 1.0;
        let from_start = i - voiced_start;
        let to_end = voiced_end - 1 - i;
        if from_start < ramp {
            edge *= from_start as f64 / ramp as f64;
        }
        if to_end < ramp {
            edge *= to_end as f64 / ramp as f64;
        }
        samples[i] = v * am * edge;
    }

    // fix the voiced level first so artifact strengths are absolute and the
    // class contrast is not washed out by a later renormalization
    let voiced_len = (voiced_end - voiced_start).max(1);
    let voiced_peak = samples[voiced_start..voiced_end]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-9);
    let base_scale = 0.35 / voiced_peak;
    for x in &mut samples {
        *x *= base_scale;
    }
    let voiced_rms = (samples[voiced_start..voiced_end]
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        / voiced_len as f64)
        .sqrt()
        .max(1e-9);

    if label == Label::Spoof {
        let mut art_rng = rng_from_seed(derive_seed(
            spec.seed,
            stream::CORPUS_ARTIFACT,
            index_in_label as u64,
        ));
        // low-band inharmonic tone cluster, 2-3.8 kHz, runs through the pads
        let tones: Vec<(f64, f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    art_rng.gen_range(2000.0..3800.0),
                    art_rng.gen_range(0.6..1.0),
                    art_rng.gen_range(0.0..std::f64::consts::TAU),
                    art_rng.gen_range(1.0..3.0),
                    art_rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        // high-band mirrored harmonics, aliasing-like images above 6 kHz
        let mirrors: Vec<(f64, f64, f64)> = harmonics
            .iter()
            .enumerate()
            .filter(|(_, &(f, _, _))| f >= 200.0 && f <= 1800.0)
            .take(12)
            .map(|(k, &(f, _, phase))| {
                let fm = 8000.0 - f;
                let amp = 1.0 / ((k + 1) as f64).sqrt();
                (fm, amp, -phase)
            })
            .collect();
        let low_amp = spec.low_band_strength * voiced_rms;
        let high_amp = spec.high_band_strength * voiced_rms;
        for (i, slot) in samples.iter_mut().enumerate() {
            let t = i as f64 / sr;
            let mut add = 0.0;
            for &(f, rel, phase, mod_rate, mod_phase) in &tones {
                let am = 0.8 + 0.2 * (std::f64::consts::TAU * mod_rate * t + mod_phase).sin();
                add += low_amp * rel * am * (std::f64::consts::TAU * f * t + phase).sin();
            }
            for &(f, rel, phase) in &mirrors {
                add += high_amp * rel * (std::f64::consts::TAU * f * t + phase).sin();
            }
            *slot += add;
        }
    }

    // noise floor 40 dB below the voiced RMS, across the full duration
    let floor = voiced_rms * 10.0f64.powf(-40.0 / 20.0);
    for x in &mut samples {
        *x += floor * base_rng.gen_range(-1.0..1.0);
    }

    AudioBuffer::new(samples, spec.sample_rate)
}
