//! Bandwidth extension: regenerate the high band of a low-pass filtered
//! 16 kHz signal.
//!
//! Two extenders sit behind one interface: a deterministic spectral
//! replication baseline (mirrored magnitudes with a fixed -12 dB/octave
//! rolloff) and a per-frame ridge regressor mapping low-band log-magnitudes
//! to high-band log-magnitudes. Either way the low band is copied through
//! untouched and the synthetic high band gets mirrored, negated phase — the
//! downstream consumer is FBANK, which is phase-insensitive.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use thiserror::Error;

use crate::filters::CutoffFraction;
use crate::signal::{self, AudioBuffer, Spectrogram};

/// Magnitude floor used when taking logs of spectra.
pub const MAG_FLOOR: f64 = 1e-10;

pub type Result<T> = std::result::Result<T, BweError>;

#[derive(Debug, Error)]
pub enum BweError {
    #[error("cutoff bin {cutoff_bin} leaves fewer than 2 high bins (n_fft {n_fft})")]
    TooFewHighBins { cutoff_bin: usize, n_fft: usize },
    #[error("ridge lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("need at least {need} aligned frame pairs, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("normal matrix is singular even with ridge regularization")]
    SingularNormalMatrix,
    #[error("extender was trained for fraction {expected} / n_fft {expected_n_fft}, got fraction {got}")]
    ExtenderMismatch { expected: f64, expected_n_fft: usize, got: f64 },
    #[error("buffers must have equal lengths and rates: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bwe model file {0}: bad magic (expected BWE1)")]
    BadMagic(String),
    #[error("bwe model file {0}: unknown extender kind {1}")]
    BadKind(String, u32),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
}

/// A band-limited signal paired with the cutoff it was limited to.
#[derive(Debug, Clone)]
pub struct BweInput {
    pub narrowband: AudioBuffer,
    pub cutoff_fraction: CutoffFraction,
}

impl BweInput {
    pub fn new(narrowband: AudioBuffer, cutoff_fraction: CutoffFraction) -> Self {
        Self { narrowband, cutoff_fraction }
    }

    /// Energy well above the cutoff (beyond 1.2x, past the filter's
    /// transition band) relative to total, in dB. Inputs that are not really
    /// band-limited show up here; callers may warn when this exceeds -40 dB.
    pub fn highband_leak_db(&self) -> Result<f64> {
        let spec = signal::stft(&self.narrowband, signal::N_FFT, signal::HOP)?;
        let cut = cutoff_bin(self.cutoff_fraction, spec.n_fft);
        let guard = ((cut as f64 * 1.2) as usize).min(spec.n_bins() - 1);
        let mut high = 0.0;
        let mut total = 0.0;
        for t in 0..spec.n_frames() {
            for (k, v) in spec.frame(t).iter().enumerate() {
                let p = v.norm_sqr();
                total += p;
                if k > guard {
                    high += p;
                }
            }
        }
        Ok(10.0 * (high.max(1e-300) / total.max(1e-300)).log10())
    }
}

/// Index of the highest bin assigned to the low band:
/// `floor(fraction * n_fft / 2)`.
pub fn cutoff_bin(fraction: CutoffFraction, n_fft: usize) -> usize {
    (fraction.get() * (n_fft / 2) as f64).floor() as usize
}

/// Per-frame linear map from low-band log-magnitudes to high-band
/// log-magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressor {
    pub cutoff_fraction: CutoffFraction,
    pub n_fft: usize,
    /// Low-band width including the cutoff bin.
    pub n_low: usize,
    /// High-band width including the Nyquist bin.
    pub n_high: usize,
    /// `n_high x n_low`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// High-band reconstruction strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum BweExtender {
    Replicate,
    LinearRegressor(LinearRegressor),
}

impl BweExtender {
    pub fn kind_name(&self) -> &'static str {
        match self {
            BweExtender::Replicate => "replicate",
            BweExtender::LinearRegressor(_) => "linear_regressor",
        }
    }
}

/// Mirror a high-band offset back into `[0, cutoff]` by repeated reflection.
fn mirror_source(cutoff: usize, offset: usize) -> usize {
    let mut m = cutoff as i64 - offset as i64;
    let c = cutoff as i64;
    loop {
        if m < 0 {
            m = -m;
        } else if m > c {
            m = 2 * c - m;
        } else {
            return m as usize;
        }
    }
}

/// Amplitude factor for the fixed -12 dB/octave replication rolloff.
fn rolloff_gain(bin: usize, cutoff: usize) -> f64 {
    let ratio = bin as f64 / cutoff as f64;
    ratio.powi(-2)
}

fn fill_high_band(
    spec: &mut Spectrogram,
    cut: usize,
    magnitudes: impl Fn(usize, &[Complex64]) -> f64,
) {
    let n_bins = spec.n_bins();
    for t in 0..spec.n_frames() {
        let frame = spec.frame_mut(t);
        let low: Vec<Complex64> = frame[..cut + 1].to_vec();
        for b in cut + 1..n_bins {
            let src = mirror_source(cut, b - cut);
            let mag = magnitudes(b, &low);
            let phase = -low[src].arg();
            frame[b] = Complex64::from_polar(mag, phase);
        }
    }
}

/// Spectral replication: high-band magnitudes mirror the low band about the
/// cutoff bin with a -12 dB/octave rolloff; low-band bins are preserved
/// bit-exactly before the inverse transform.
pub fn extend_replicate(input: &BweInput) -> Result<AudioBuffer> {
    let mut spec = signal::stft(&input.narrowband, signal::N_FFT, signal::HOP)?;
    let cut = cutoff_bin(input.cutoff_fraction, spec.n_fft);
    if spec.n_bins().saturating_sub(cut + 1) < 2 {
        return Err(BweError::TooFewHighBins { cutoff_bin: cut, n_fft: spec.n_fft });
    }
    fill_high_band(&mut spec, cut, |b, low| {
        let src = mirror_source(cut, b - cut);
        low[src].norm() * rolloff_gain(b, cut)
    });
    Ok(signal::istft(&spec, input.narrowband.len())?)
}

/// Streaming accumulator for the ridge regression normal equations, so
/// training does not need all pairs in memory at once.
pub struct RegressorTrainer {
    cutoff_fraction: CutoffFraction,
    n_fft: usize,
    n_low: usize,
    n_high: usize,
    /// Augmented feature dimension (n_low + bias column).
    d: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    frames: usize,
}

impl RegressorTrainer {
    pub fn new(cutoff_fraction: CutoffFraction) -> Result<Self> {
        let n_fft = signal::N_FFT;
        let cut = cutoff_bin(cutoff_fraction, n_fft);
        let n_bins = n_fft / 2 + 1;
        let n_high = n_bins - cut - 1;
        if n_high < 2 {
            return Err(BweError::TooFewHighBins { cutoff_bin: cut, n_fft });
        }
        let n_low = cut + 1;
        let d = n_low + 1;
        Ok(Self {
            cutoff_fraction,
            n_fft,
            n_low,
            n_high,
            d,
            xtx: vec![0.0; d * d],
            xty: vec![0.0; d * n_high],
            frames: 0,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Accumulate all aligned frames of one (narrowband, wideband) pair.
    pub fn accumulate(&mut self, narrowband: &AudioBuffer, wideband: &AudioBuffer) -> Result<()> {
        if narrowband.len() != wideband.len() || narrowband.sample_rate != wideband.sample_rate {
            return Err(BweError::LengthMismatch(narrowband.len(), wideband.len()));
        }
        let nb = signal::stft(narrowband, self.n_fft, signal::HOP)?;
        let wb = signal::stft(wideband, self.n_fft, signal::HOP)?;
        let mut x = vec![0.0; self.d];
        let mut y = vec![0.0; self.n_high];
        for t in 0..nb.n_frames() {
            let nf = nb.frame(t);
            let wf = wb.frame(t);
            for (i, slot) in x[..self.n_low].iter_mut().enumerate() {
                *slot = nf[i].norm().max(MAG_FLOOR).ln();
            }
            x[self.n_low] = 1.0;
            for (j, slot) in y.iter_mut().enumerate() {
                *slot = wf[self.n_low + j].norm().max(MAG_FLOOR).ln();
            }
            self.add_frame(&x, &y);
        }
        Ok(())
    }

    /// Accumulate one raw frame: `x` is the low-band log-magnitude vector
    /// (without bias), `y` the high-band log-magnitude targets.
    pub fn accumulate_frame(&mut self, x_low: &[f64], y_high: &[f64]) {
        assert_eq!(x_low.len(), self.n_low);
        assert_eq!(y_high.len(), self.n_high);
        let mut x = Vec::with_capacity(self.d);
        x.extend_from_slice(x_low);
        x.push(1.0);
        self.add_frame(&x, y_high);
    }

    fn add_frame(&mut self, x: &[f64], y: &[f64]) {
        let d = self.d;
        for i in 0..d {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.xtx[i * d..(i + 1) * d];
            for (slot, &xj) in row.iter_mut().zip(x) {
                *slot += xi * xj;
            }
            let row = &mut self.xty[i * self.n_high..(i + 1) * self.n_high];
            for (slot, &yj) in row.iter_mut().zip(y) {
                *slot += xi * yj;
            }
        }
        self.frames += 1;
    }

    /// Solve the regularized normal equations. The bias column is not
    /// penalized.
    pub fn finish(self, ridge_lambda: f64) -> Result<BweExtender> {
        if ridge_lambda <= 0.0 {
            return Err(BweError::NonPositiveLambda(ridge_lambda));
        }
        if self.frames < 100 {
            return Err(BweError::TooFewFrames { need: 100, got: self.frames });
        }
        let d = self.d;
        let mut a = self.xtx;
        for i in 0..d - 1 {
            a[i * d + i] += ridge_lambda;
        }
        let mut rhs = self.xty;
        cholesky_solve_in_place(&mut a, d, &mut rhs, self.n_high)?;
        // rhs now holds the (d x n_high) coefficient matrix; transpose into
        // row-major (n_high x n_low) weights plus bias
        let mut weights = vec![0.0; self.n_high * self.n_low];
        let mut bias = vec![0.0; self.n_high];
        for j in 0..self.n_high {
            for i in 0..self.n_low {
                weights[j * self.n_low + i] = rhs[i * self.n_high + j];
            }
            bias[j] = rhs[(d - 1) * self.n_high + j];
        }
        Ok(BweExtender::LinearRegressor(LinearRegressor {
            cutoff_fraction: self.cutoff_fraction,
            n_fft: self.n_fft,
            n_low: self.n_low,
            n_high: self.n_high,
            weights,
            bias,
        }))
    }
}

/// Cholesky factorization and multi-RHS solve of a symmetric positive
/// definite system, in place.
fn cholesky_solve_in_place(a: &mut [f64], n: usize, rhs: &mut [f64], m: usize) -> Result<()> {
    // factor A = L L^T, L stored in the lower triangle
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(BweError::SingularNormalMatrix);
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    // forward substitution: L z = rhs
    for i in 0..n {
        for k in 0..i {
            let l = a[i * n + k];
            for c in 0..m {
                rhs[i * m + c] -= l * rhs[k * m + c];
            }
        }
        let d = a[i * n + i];
        for c in 0..m {
            rhs[i * m + c] /= d;
        }
    }
    // back substitution: L^T w = z
    for i in (0..n).rev() {
        for k in i + 1..n {
            let l = a[k * n + i];
            for c in 0..m {
                rhs[i * m + c] -= l * rhs[k * m + c];
            }
        }
        let d = a[i * n + i];
        for c in 0..m {
            rhs[i * m + c] /= d;
        }
    }
    Ok(())
}

/// Train the spectral regressor on aligned (narrowband, wideband) pairs via
/// closed-form ridge regression.
pub fn train_linear_regressor(
    pairs: &[(AudioBuffer, AudioBuffer)],
    cutoff_fraction: CutoffFraction,
    ridge_lambda: f64,
) -> Result<BweExtender> {
    let mut trainer = RegressorTrainer::new(cutoff_fraction)?;
    for (nb, wb) in pairs {
        trainer.accumulate(nb, wb)?;
    }
    trainer.finish(ridge_lambda)
}

/// Extend a band-limited signal with the chosen extender.
pub fn extend(input: &BweInput, extender: &BweExtender) -> Result<AudioBuffer> {
    match extender {
        BweExtender::Replicate => extend_replicate(input),
        BweExtender::LinearRegressor(reg) => {
            if reg.cutoff_fraction != input.cutoff_fraction || reg.n_fft != signal::N_FFT {
                return Err(BweError::ExtenderMismatch {
                    expected: reg.cutoff_fraction.get(),
                    expected_n_fft: reg.n_fft,
                    got: input.cutoff_fraction.get(),
                });
            }
            let mut spec = signal::stft(&input.narrowband, signal::N_FFT, signal::HOP)?;
            let cut = cutoff_bin(input.cutoff_fraction, spec.n_fft);
            let n_low = reg.n_low;
            let mut x = vec![0.0; n_low];
            let mut mags = vec![0.0; reg.n_high];
            let n_bins = spec.n_bins();
            for t in 0..spec.n_frames() {
                let frame = spec.frame_mut(t);
                for (i, slot) in x.iter_mut().enumerate() {
                    *slot = frame[i].norm().max(MAG_FLOOR).ln();
                }
                for (j, slot) in mags.iter_mut().enumerate() {
                    let row = &reg.weights[j * n_low..(j + 1) * n_low];
                    let mut acc = reg.bias[j];
                    for (w, xi) in row.iter().zip(&x) {
                        acc += w * xi;
                    }
                    *slot = acc.exp();
                }
                for b in cut + 1..n_bins {
                    let src = mirror_source(cut, b - cut);
                    let phase = -frame[src].arg();
                    frame[b] = Complex64::from_polar(mags[b - cut - 1], phase);
                }
            }
            Ok(signal::istft(&spec, input.narrowband.len())?)
        }
    }
}

/// Extension quality: high-band log-spectral distance and high-band SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BweQuality {
    pub lsd: f64,
    pub highband_snr: f64,
}

/// LSD over the high band (dB) plus a time-domain high-band SNR computed on
/// the spectrally isolated residual.
pub fn measure_quality(
    extended: &AudioBuffer,
    reference: &AudioBuffer,
    cutoff_fraction: CutoffFraction,
) -> Result<BweQuality> {
    if extended.len() != reference.len() || extended.sample_rate != reference.sample_rate {
        return Err(BweError::LengthMismatch(extended.len(), reference.len()));
    }
    let se = signal::stft(extended, signal::N_FFT, signal::HOP)?;
    let sr = signal::stft(reference, signal::N_FFT, signal::HOP)?;
    let cut = cutoff_bin(cutoff_fraction, se.n_fft);
    let n_bins = se.n_bins();
    let mut lsd_acc = 0.0;
    for t in 0..se.n_frames() {
        let fe = se.frame(t);
        let fr = sr.frame(t);
        let mut acc = 0.0;
        for b in cut + 1..n_bins {
            let d = 20.0
                * (fe[b].norm().max(MAG_FLOOR) / fr[b].norm().max(MAG_FLOOR)).log10();
            acc += d * d;
        }
        lsd_acc += (acc / (n_bins - cut - 1) as f64).sqrt();
    }
    let lsd = lsd_acc / se.n_frames() as f64;

    let highband = |spec: &Spectrogram| -> Result<AudioBuffer> {
        let mut hp = spec.clone();
        for t in 0..hp.n_frames() {
            for v in hp.frame_mut(t)[..cut + 1].iter_mut() {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        Ok(signal::istft(&hp, extended.len())?)
    };
    let he = highband(&se)?;
    let hr = highband(&sr)?;
    let p_ref: f64 = hr.samples.iter().map(|x| x * x).sum();
    let p_err: f64 = hr
        .samples
        .iter()
        .zip(&he.samples)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    let highband_snr = if p_err < 1e-300 {
        300.0
    } else {
        10.0 * (p_ref.max(1e-300) / p_err).log10()
    };
    Ok(BweQuality { lsd, highband_snr })
}

/// Serialize an extender: magic `BWE1`, u32 kind, f64 fraction, u32 n_fft,
/// and for the regressor u32 dims plus the f64 payload.
pub fn write_extender(extender: &BweExtender, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(b"BWE1")?;
    match extender {
        BweExtender::Replicate => {
            f.write_u32::<LittleEndian>(0)?;
        }
        BweExtender::LinearRegressor(reg) => {
            f.write_u32::<LittleEndian>(1)?;
            f.write_f64::<LittleEndian>(reg.cutoff_fraction.get())?;
            f.write_u32::<LittleEndian>(reg.n_fft as u32)?;
            f.write_u32::<LittleEndian>(reg.n_low as u32)?;
            f.write_u32::<LittleEndian>(reg.n_high as u32)?;
            for &w in &reg.weights {
                f.write_f64::<LittleEndian>(w)?;
            }
            for &b in &reg.bias {
                f.write_f64::<LittleEndian>(b)?;
            }
        }
    }
    Ok(())
}

/// Read an extender written by [`write_extender`].
pub fn read_extender(path: &Path) -> Result<BweExtender> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != b"BWE1" {
        return Err(BweError::BadMagic(path.display().to_string()));
    }
    match f.read_u32::<LittleEndian>()? {
        0 => Ok(BweExtender::Replicate),
        1 => {
            let fraction = f.read_f64::<LittleEndian>()?;
            let n_fft = f.read_u32::<LittleEndian>()? as usize;
            let n_low = f.read_u32::<LittleEndian>()? as usize;
            let n_high = f.read_u32::<LittleEndian>()? as usize;
            let mut weights = vec![0.0; n_high * n_low];
            for w in &mut weights {
                *w = f.read_f64::<LittleEndian>()?;
            }
            let mut bias = vec![0.0; n_high];
            for b in &mut bias {
                *b = f.read_f64::<LittleEndian>()?;
            }
            let cutoff_fraction = CutoffFraction::new(fraction)
                .map_err(|_| BweError::BadMagic(path.display().to_string()))?;
            Ok(BweExtender::LinearRegressor(LinearRegressor {
                cutoff_fraction,
                n_fft,
                n_low,
                n_high,
                weights,
                bias,
            }))
        }
        k => Err(BweError::BadKind(path.display().to_string(), k)),
    }
}
