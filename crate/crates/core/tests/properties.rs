//! Property tests for invariants that should hold over the whole input
//! space, not just the worked examples.

use proptest::prelude::*;

use sbcm::channel::{self, Label};
use sbcm::eval::{compute_eer, ScoreSet};
use sbcm::features;
use sbcm::filters::CutoffFraction;
use sbcm::signal::{self, AudioBuffer};

fn score_set(bona: &[f64], spoof: &[f64]) -> ScoreSet {
    let mut set = ScoreSet::default();
    for (i, &s) in bona.iter().enumerate() {
        set.push(format!("b{i}"), Label::Bonafide, s);
    }
    for (i, &s) in spoof.iter().enumerate() {
        set.push(format!("s{i}"), Label::Spoof, s);
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eer_invariant_under_positive_affine_maps(
        bona in prop::collection::vec(-5.0f64..5.0, 2..30),
        spoof in prop::collection::vec(-5.0f64..5.0, 2..30),
        slope in 0.01f64..20.0,
        intercept in -10.0f64..10.0,
    ) {
        let base = compute_eer(&score_set(&bona, &spoof)).unwrap();
        let tb: Vec<f64> = bona.iter().map(|x| slope * x + intercept).collect();
        let ts: Vec<f64> = spoof.iter().map(|x| slope * x + intercept).collect();
        let mapped = compute_eer(&score_set(&tb, &ts)).unwrap();
        prop_assert_eq!(base.eer, mapped.eer);
        prop_assert!(base.eer >= 0.0 && base.eer <= 1.0);
    }

    #[test]
    fn istft_reconstructs_interiors(len in 2048usize..6000, seed in 0u64..1000) {
        let mut rng = sbcm::rng::rng_from_seed(seed);
        use rand::Rng;
        let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let buf = AudioBuffer::new(samples, 16000);
        let spec = signal::stft(&buf, 1024, 128).unwrap();
        let back = signal::istft(&spec, len).unwrap();
        for i in 512..len - 512 {
            prop_assert!((back.samples[i] - buf.samples[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn trim_index_floor_formula_matches_breakpoint_search(fraction in 0.02f64..1.0) {
        let frac = CutoffFraction::new(fraction).unwrap();
        let spec = features::trim_index(frac, 80, 8000.0).unwrap();
        let f_low = fraction * 8000.0;
        let mut brute = 0usize;
        for n in 0..=80usize {
            let f_n = 700.0 * ((1.0f64 + 8000.0 / 700.0).powf(n as f64 / 80.0) - 1.0);
            if f_n <= f_low {
                brute = n;
            }
        }
        prop_assert_eq!(spec.n_low, brute);
        // the effective cutoff inverts the floored index
        let back = 80.0 * (1.0 + spec.f_low_effective / 700.0).ln()
            / (1.0f64 + 8000.0 / 700.0).ln();
        prop_assert!((back - spec.n_low as f64).abs() < 1e-9);
    }

    #[test]
    fn mulaw_compand_expand_are_inverses(x in -1.0f64..=1.0) {
        let y = channel::mulaw_compand(x, 255.0);
        prop_assert!(y.abs() <= 1.0 + 1e-12);
        let back = channel::mulaw_expand(y, 255.0);
        prop_assert!((back - x).abs() < 1e-9);
    }

    #[test]
    fn add_noise_hits_requested_snr(snr in -10.0f64..60.0, seed in 0u64..500) {
        let mut rng = sbcm::rng::rng_from_seed(seed);
        use rand::Rng;
        let clean = AudioBuffer::new(
            (0..4000).map(|i| 0.4 * (0.3 * i as f64).sin()).collect(),
            16000,
        );
        let noise = AudioBuffer::new(
            (0..2500).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            16000,
        );
        let out = channel::add_noise(&clean, &noise, snr).unwrap();
        let p_clean: f64 = clean.samples.iter().map(|x| x * x).sum();
        let p_noise: f64 = clean
            .samples
            .iter()
            .zip(&out.samples)
            .map(|(c, o)| (o - c) * (o - c))
            .sum();
        let measured = 10.0 * (p_clean / p_noise).log10();
        prop_assert!((measured - snr).abs() < 0.01, "requested {} measured {}", snr, measured);
    }

    #[test]
    fn vad_boundaries_stay_ordered(lead in 0usize..5000, body in 2048usize..9000, tail in 0usize..5000) {
        let mut samples = vec![0.0; lead];
        for i in 0..body {
            samples.push(0.4 * (0.7 * i as f64).sin());
        }
        samples.extend(std::iter::repeat(0.0).take(tail));
        let buf = AudioBuffer::new(samples, 16000);
        let res = features::vad_trim(
            &buf,
            features::VAD_TOP_DB,
            features::VAD_FRAME,
            features::VAD_HOP,
        )
        .unwrap();
        prop_assert!(res.start <= res.end);
        prop_assert!(res.end <= buf.len());
        prop_assert_eq!(res.trimmed.len(), res.end - res.start);
        // trimming never cuts into the tone body
        prop_assert!(res.start <= lead);
        prop_assert!(res.end >= lead + body);
    }
}
