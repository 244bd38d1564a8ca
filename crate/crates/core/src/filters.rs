//! Chebyshev Type I low-pass design and second-order-section filtering.
//!
//! The design path is: analog prototype poles on the standard ellipse,
//! frequency prewarping, bilinear transform, and conjugate-pair grouping into
//! biquads. The ripple parameter is interpreted in dB (the conventional unit
//! for this parameter in filter-design APIs); `0.05` means 0.05 dB.

use num_complex::Complex64;
use thiserror::Error;

use crate::signal::AudioBuffer;

pub type Result<T> = std::result::Result<T, FilterError>;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter order must be at least 1")]
    ZeroOrder,
    #[error("passband ripple must be positive, got {0} dB")]
    NonPositiveRipple(f64),
    #[error("cutoff {cutoff_hz} Hz must lie strictly inside (0, {nyquist_hz}) at {sample_rate} Hz")]
    CutoffOutOfRange {
        cutoff_hz: f64,
        nyquist_hz: f64,
        sample_rate: u32,
    },
    #[error("cutoff fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("filter produced non-finite output at sample {0}")]
    NonFiniteOutput(usize),
}

/// Order of the low-pass front-end filter.
pub const FRONTEND_ORDER: usize = 8;
/// Passband ripple of the front-end filter, in dB.
pub const FRONTEND_RIPPLE_DB: f64 = 0.05;

/// Everything needed to design one low-pass filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub ripple_db: f64,
    pub cutoff_hz: f64,
    pub sample_rate: u32,
}

impl FilterSpec {
    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(FilterError::ZeroOrder);
        }
        if self.ripple_db <= 0.0 {
            return Err(FilterError::NonPositiveRipple(self.ripple_db));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(FilterError::CutoffOutOfRange {
                cutoff_hz: self.cutoff_hz,
                nyquist_hz: nyquist,
                sample_rate: self.sample_rate,
            });
        }
        Ok(())
    }
}

/// Low-pass cutoff as a fraction of the Nyquist frequency, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CutoffFraction(f64);

impl CutoffFraction {
    pub fn new(fraction: f64) -> Result<Self> {
        if fraction.is_finite() && fraction > 0.0 && fraction <= 1.0 {
            Ok(Self(fraction))
        } else {
            Err(FilterError::BadFraction(fraction))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Cutoff in Hz at the given sample rate.
    pub fn cutoff_hz(self, sample_rate: u32) -> f64 {
        self.0 * sample_rate as f64 / 2.0
    }
}

impl std::fmt::Display for CutoffFraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One biquad stage, denominator normalized so a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Both poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b0 + self.b1 * z_inv + self.b2 * z_inv2;
        let den = 1.0 + self.a1 * z_inv + self.a2 * z_inv2;
        num / den
    }

    /// Pole magnitudes (the larger first).
    pub fn pole_magnitudes(&self) -> [f64; 2] {
        // roots of z^2 + a1 z + a2
        let half = -self.a1 / 2.0;
        let disc = half * half - self.a2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            let (p, q) = ((half + r).abs(), (half - r).abs());
            [p.max(q), p.min(q)]
        } else {
            let m = (half * half - disc).sqrt(); // |pole| = sqrt(a2)
            [m, m]
        }
    }
}

/// Cascade-of-biquads realization of a designed filter.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub overall_gain: f64,
}

impl SosFilter {
    /// Unity pass-through filter.
    pub fn identity() -> Self {
        Self {
            sections: vec![Biquad { b0: 1.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 }],
            overall_gain: 1.0,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Largest pole magnitude over all sections.
    pub fn max_pole_magnitude(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| s.pole_magnitudes()[0])
            .fold(0.0, f64::max)
    }

    /// Coefficient dump with 17 significant digits, one section per line.
    pub fn to_debug_text(&self) -> String {
        let mut out = format!("gain {:.16e}\n", self.overall_gain);
        for (i, s) in self.sections.iter().enumerate() {
            out.push_str(&format!(
                "sos{} b {:.16e} {:.16e} {:.16e} a 1 {:.16e} {:.16e}\n",
                i, s.b0, s.b1, s.b2, s.a1, s.a2
            ));
        }
        out
    }
}

/// Design a digital Chebyshev Type I low-pass filter.
///
/// The analog prototype has `ε = sqrt(10^(ripple/10) - 1)` and poles on the
/// ellipse with axes `sinh(μ)`, `cosh(μ)` where `μ = asinh(1/ε)/order`; the
/// bilinear transform uses prewarping so the discrete magnitude at
/// `cutoff_hz` equals exactly `-ripple_db` dB.
pub fn design_cheby1(spec: &FilterSpec) -> Result<SosFilter> {
    spec.validate()?;
    let n = spec.order;
    let eps = (10.0f64.powf(spec.ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n as f64;
    let (sinh_mu, cosh_mu) = (mu.sinh(), mu.cosh());

    // analog prototype poles, passband edge at 1 rad/s
    let mut poles: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64;
            Complex64::new(-sinh_mu * theta.sin(), cosh_mu * theta.cos())
        })
        .collect();

    // prototype gain: H(0) = 1 for odd order, -ripple dB for even
    let prod_neg: Complex64 = poles.iter().map(|p| -p).product();
    let mut gain = prod_neg.re;
    if n % 2 == 0 {
        gain /= (1.0 + eps * eps).sqrt();
    }

    // prewarp and scale to the requested cutoff
    let fs2 = 2.0 * spec.sample_rate as f64;
    let warped =
        fs2 * (std::f64::consts::PI * spec.cutoff_hz / spec.sample_rate as f64).tan();
    for p in &mut poles {
        *p *= warped;
    }
    gain *= warped.powi(n as i32);

    // bilinear transform: n zeros land at z = -1
    let mut denom = Complex64::new(1.0, 0.0);
    for p in &poles {
        denom *= fs2 - p;
    }
    let digital_gain = gain / denom.re;
    let z_poles: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();

    // group conjugate pairs (poles with positive imaginary part carry their
    // conjugates); a single real pole exists only for odd order
    let mut pairs: Vec<Complex64> = z_poles.iter().copied().filter(|p| p.im > 1e-12).collect();
    pairs.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let reals: Vec<f64> = z_poles
        .iter()
        .filter(|p| p.im.abs() <= 1e-12)
        .map(|p| p.re)
        .collect();

    let mut sections = Vec::with_capacity(n / 2 + n % 2);
    for p in pairs {
        sections.push(Biquad {
            b0: 1.0,
            b1: 2.0,
            b2: 1.0,
            a1: -2.0 * p.re,
            a2: p.norm_sqr(),
        });
    }
    for r in reals {
        sections.push(Biquad { b0: 1.0, b1: 1.0, b2: 0.0, a1: -r, a2: 0.0 });
    }

    Ok(SosFilter { sections, overall_gain: digital_gain })
}

/// Evaluate `H(e^{iω})` of the cascade at the given frequencies.
pub fn freq_response(filter: &SosFilter, freqs_hz: &[f64], sample_rate: u32) -> Vec<Complex64> {
    freqs_hz
        .iter()
        .map(|&f| {
            let omega = 2.0 * std::f64::consts::PI * f / sample_rate as f64;
            let z_inv = Complex64::new(omega.cos(), -omega.sin());
            filter
                .sections
                .iter()
                .fold(Complex64::new(filter.overall_gain, 0.0), |acc, s| {
                    acc * s.response(z_inv)
                })
        })
        .collect()
}

/// Causal direct-form-II-transposed filtering with zero initial state.
/// Output length equals input length.
pub fn sosfilt(filter: &SosFilter, buffer: &AudioBuffer) -> Result<AudioBuffer> {
    let mut data = buffer.samples.clone();
    for section in &filter.sections {
        let (b0, b1, b2, a1, a2) = (section.b0, section.b1, section.b2, section.a1, section.a2);
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for x in data.iter_mut() {
            let input = *x;
            let y = b0 * input + s0;
            s0 = b1 * input - a1 * y + s1;
            s1 = b2 * input - a2 * y;
            *x = y;
        }
    }
    if filter.overall_gain != 1.0 {
        for x in data.iter_mut() {
            *x *= filter.overall_gain;
        }
    }
    if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
        return Err(FilterError::NonFiniteOutput(bad));
    }
    Ok(AudioBuffer::new(data, buffer.sample_rate))
}

/// Low-pass front-end: order-8, 0.05 dB Chebyshev Type I at
/// `fraction x Nyquist`, applied causally. The sample rate is unchanged.
pub fn lowpass_frontend(buffer: &AudioBuffer, fraction: CutoffFraction) -> Result<AudioBuffer> {
    let spec = FilterSpec {
        order: FRONTEND_ORDER,
        ripple_db: FRONTEND_RIPPLE_DB,
        cutoff_hz: fraction.cutoff_hz(buffer.sample_rate),
        sample_rate: buffer.sample_rate,
    };
    let filter = design_cheby1(&spec)?;
    sosfilt(&filter, buffer)
}
