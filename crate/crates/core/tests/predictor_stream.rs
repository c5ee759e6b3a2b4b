use std::sync::Arc;

use proptest::prelude::*;

use rapidhare::predictor::{naive_window_scores, posterior};
use rapidhare::{predict_sequence_naive, PredictorConfig, PredictorSession};

mod common;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn streaming_equals_naive(seed in any::<u64>(), k in prop::sample::select(vec![0usize, 1, 5, 26]), len in 1usize..400) {
        let mut rng = common::rng(seed);
        let models = Arc::new(common::random_models(&mut rng, 8, 2, 3));
        let frames = common::uniform_frames(&mut rng, 3, len);
        let cfg = PredictorConfig::with_window(k);
        let naive = naive_window_scores(&models, frames.view(), &cfg).unwrap();
        let mut session = PredictorSession::new(models.clone(), cfg).unwrap();
        for (x, expected) in frames.rows().zip(&naive) {
            let p = session.push(x).unwrap();
            let best = rapidhare::predictor::argmax(expected);
            prop_assert_eq!(p.label, models.labels()[best]);
            for (a, b) in session.window_sums().iter().zip(expected) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn predictions_are_causal(seed in any::<u64>(), len in 2usize..200, cut in 1usize..200) {
        let mut rng = common::rng(seed);
        let models = common::random_models(&mut rng, 8, 2, 2);
        let frames = common::uniform_frames(&mut rng, 2, len);
        let cut = cut.min(len);
        let cfg = PredictorConfig::with_window(5);
        let full = predict_sequence_naive(&models, frames.view(), &cfg).unwrap();
        let part = predict_sequence_naive(&models, frames.view().slice(0..cut), &cfg).unwrap();
        prop_assert_eq!(&full[..cut], part.as_slice());
    }

    #[test]
    fn shifting_all_log_priors_keeps_labels(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut rng = common::rng(seed);
        let models = Arc::new(common::random_models(&mut rng, 8, 2, 2));
        let frames = common::uniform_frames(&mut rng, 2, 100);
        let scores = naive_window_scores(&models, frames.view(), &PredictorConfig::with_window(3)).unwrap();
        for s in &scores {
            let shifted: Vec<f64> = s.iter().map(|v| v + shift).collect();
            prop_assert_eq!(rapidhare::predictor::argmax(s), rapidhare::predictor::argmax(&shifted));
            let a = posterior(s, None);
            let b = posterior(&shifted, None);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn non_uniform_priors_bias_toward_favoured_activity() {
    let mut rng = common::rng(3);
    let models = Arc::new(common::random_models(&mut rng, 8, 1, 2));
    let mut priors = [1e-6f64; 8];
    priors[4] = 1.0 - 7e-6;
    let cfg = PredictorConfig {
        log_priors: Some(priors.iter().map(|p| p.ln()).collect()),
        ..PredictorConfig::with_window(0)
    };
    let mut session = PredictorSession::new(models.clone(), cfg).unwrap();
    let x: Vec<f64> = models.models()[4].components()[0].mean.clone();
    assert_eq!(session.push(&x).unwrap().label, models.labels()[4]);
}

#[test]
fn evaluation_counter_is_independent_of_window() {
    let mut rng = common::rng(8);
    let models = Arc::new(common::random_models(&mut rng, 8, 3, 4));
    let frames = common::uniform_frames(&mut rng, 4, 500);
    for k in [0, 1, 26, 300] {
        let mut s = PredictorSession::new(models.clone(), PredictorConfig::with_window(k)).unwrap();
        for (t, x) in frames.rows().enumerate() {
            s.push(x).unwrap();
            assert_eq!(s.evaluations(), 8 * (t as u64 + 1));
        }
    }
}

#[test]
fn posterior_is_a_distribution() {
    let mut rng = common::rng(12);
    let models = Arc::new(common::random_models(&mut rng, 8, 2, 3));
    let frames = common::uniform_frames(&mut rng, 3, 300);
    let mut s = PredictorSession::new(models, PredictorConfig::default()).unwrap();
    for x in frames.rows() {
        let p = s.push(x).unwrap();
        let total: f64 = p.posterior.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(p.posterior.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
