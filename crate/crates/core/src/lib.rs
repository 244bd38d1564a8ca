//! Codec-robust voice anti-spoofing front-ends and a desk-scale countermeasure.
//!
//! The crate is organized around the processing chain used by the `sbcm` CLI:
//!
//! * [`signal`] — audio buffers, WAV I/O, FFT/STFT/ISTFT, 2:1 resampling
//! * [`filters`] — Chebyshev Type I low-pass design and SOS filtering
//! * [`features`] — mel filterbanks, FBANK extraction, band trimming, VAD
//! * [`channel`] — augmentation, codec simulation, synthetic corpus generation
//! * [`bwe`] — bandwidth extension of low-pass filtered signals
//! * [`classifier`] — attentive-statistics-pooling classifier with Adam
//! * [`eval`] — score files and equal-error-rate computation

pub mod bwe;
pub mod channel;
pub mod classifier;
pub mod eval;
pub mod features;
pub mod filters;
pub mod rng;
pub mod signal;
