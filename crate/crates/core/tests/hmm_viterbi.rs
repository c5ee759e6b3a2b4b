use std::time::Instant;

use rand::Rng;

use rapidhare::hmm::{HmmConfig, TransitionMatrix};
use rapidhare::{
    predict_stream_hmm, viterbi_block, ActivityLabel, ActivityModelSet, ComponentCounts,
    FrameMatrix,
};

mod common;

fn random_transitions(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> TransitionMatrix<f64> {
    let mut probs = Vec::with_capacity(n * n);
    for _ in 0..n {
        // some entries forbidden outright
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random_range(0.05..1.0)
                }
            })
            .collect();
        let raw = if raw.iter().all(|v| *v == 0.0) {
            vec![1.0; n]
        } else {
            raw
        };
        let total: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|v| v / total));
    }
    TransitionMatrix::new(n, probs).unwrap()
}

/// Best path by enumerating all `n^T` state sequences.
fn exhaustive(
    models: &ActivityModelSet<f64>,
    trans: &TransitionMatrix<f64>,
    prior: &[f64],
    frames: &FrameMatrix<f64>,
) -> (Vec<usize>, f64) {
    let n = trans.n();
    let t_len = frames.len();
    let emissions: Vec<Vec<f64>> = frames
        .rows()
        .map(|x| {
            models
                .models()
                .iter()
                .map(|m| m.log_pdf(x).unwrap())
                .collect()
        })
        .collect();
    let mut best = (vec![0; t_len], f64::NEG_INFINITY);
    for code in 0..n.pow(t_len as u32) {
        let path: Vec<usize> = (0..t_len).map(|t| (code / n.pow(t as u32)) % n).collect();
        let mut lp = prior[path[0]].ln() + emissions[0][path[0]];
        for t in 1..t_len {
            lp += trans.log_prob(path[t - 1], path[t]) + emissions[t][path[t]];
        }
        if lp > best.1 {
            best = (path, lp);
        }
    }
    best
}

#[test]
fn block_viterbi_matches_exhaustive_search() {
    for seed in 0..100u64 {
        let mut rng = common::rng(seed);
        let models = common::random_models(&mut rng, 3, 2, 2);
        let trans = random_transitions(&mut rng, 3);
        let t_len = rng.random_range(1..=5);
        let frames = common::uniform_frames(&mut rng, 2, t_len);
        let prior = [0.2, 0.5, 0.3];
        let path = viterbi_block(&models, &trans, &prior, frames.view()).unwrap();
        let (states, lp) = exhaustive(&models, &trans, &prior, &frames);
        assert_eq!(path.states, states, "seed {seed}");
        assert!(
            (path.log_prob - lp).abs() <= 1e-9 * lp.abs().max(1.0),
            "seed {seed}"
        );
    }
}

#[test]
fn decoded_blocks_avoid_forbidden_transitions() {
    let mut rng = common::rng(77);
    let models = common::random_models(&mut rng, 8, 2, 3);
    let trans = TransitionMatrix::default_activities();
    let frames = common::uniform_frames(&mut rng, 3, 2000);
    let cfg = HmmConfig::default();
    let labels = predict_stream_hmm(&models, &trans, &cfg, frames.view()).unwrap();
    for block in labels.chunks(cfg.window_w) {
        for w in block.windows(2) {
            assert!(
                trans.prob(w[0].index(), w[1].index()) > 0.0,
                "{} -> {}",
                w[0],
                w[1]
            );
        }
    }
    // block boundaries chain through the previous final state as well
    for w in labels.windows(2) {
        assert!(trans.prob(w[0].index(), w[1].index()) > 0.0);
    }
    assert!(!labels
        .windows(2)
        .any(|w| w[0] == ActivityLabel::Sitting && w[1] == ActivityLabel::Running));
}

#[test]
fn per_frame_time_grows_as_blocks_shrink() {
    let models =
        rapidhare::bench::random_model_set::<f64>(&ComponentCounts::uniform(1), 1, 3).unwrap();
    let trans = TransitionMatrix::default_activities();
    let frames = rapidhare::bench::random_frames::<f64>(1, 20_000, 4);
    let time = |w: usize| {
        let cfg = HmmConfig::uniform(8, w);
        (0..7)
            .map(|_| {
                let start = Instant::now();
                std::hint::black_box(
                    predict_stream_hmm(&models, &trans, &cfg, frames.view()).unwrap(),
                );
                start.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let times: Vec<f64> = [50, 25, 10, 5].iter().map(|&w| time(w)).collect();
    // small slack absorbs timer noise between neighbouring sizes
    for pair in times.windows(2) {
        assert!(
            pair[1] >= pair[0] * 0.95,
            "times for W = 50, 25, 10, 5: {times:?}"
        );
    }
    assert!(
        times[3] > times[0],
        "times for W = 50, 25, 10, 5: {times:?}"
    );
}
