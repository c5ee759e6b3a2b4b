//! Per-frame latency measurement for the rolling-window predictor and the
//! block Viterbi baseline. Frames are generated up front so only inference
//! is timed.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{ActivityLabel, FrameMatrix};
use crate::error::{Error, Result};
use crate::eval::Method;
use crate::gmm::{ActivityModelSet, Component, ComponentCounts, GmmModel};
use crate::hmm::{viterbi_block, HmmConfig, TransitionMatrix};
use crate::predictor::{PredictorConfig, PredictorSession};
use crate::scalar::{lit, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchStats {
    /// Mean over repeats of the per-frame time, microseconds.
    pub mean_us: f64,
    /// Standard deviation of the per-repeat means.
    pub std_us: f64,
    /// 99th percentile of individual per-frame times.
    pub p99_us: f64,
    pub frames: usize,
    pub repeats: usize,
    pub method: Method,
}

/// Mixtures with random means in `[-1, 1]`, variances in `[0.01, 0.5]` and
/// random weights; useful when only timing matters.
pub fn random_model_set<T: Scalar>(
    counts: &ComponentCounts,
    dim: usize,
    seed: u64,
) -> Result<ActivityModelSet<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = ActivityLabel::ALL
        .iter()
        .map(|&label| {
            let k = counts.get(label);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let components = raw
                .iter()
                .map(|w| Component {
                    weight: lit(w / total),
                    mean: (0..dim).map(|_| lit(rng.random_range(-1.0..1.0))).collect(),
                    variance: (0..dim).map(|_| lit(rng.random_range(0.01..0.5))).collect(),
                })
                .collect();
            GmmModel::new(components).map(|m| (label, m))
        })
        .collect::<Result<Vec<_>>>()?;
    ActivityModelSet::new(entries)
}

/// Uniform random frames in `[-1, 1]`.
pub fn random_frames<T: Scalar>(dim: usize, frames: usize, seed: u64) -> FrameMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dim * frames)
        .map(|_| lit(rng.random_range(-1.0..=1.0)))
        .collect();
    FrameMatrix::from_flat(dim, data).expect("length is a multiple of dim")
}

fn check_sizes(frames: usize, repeats: usize) -> Result<()> {
    if frames == 0 || repeats == 0 {
        return Err(Error::InvalidConfig(
            "benchmark needs at least one frame and one repeat".into(),
        ));
    }
    Ok(())
}

fn summarize(
    per_repeat_us: &[f64],
    mut samples_us: Vec<f64>,
    frames: usize,
    method: Method,
) -> BenchStats {
    let n = per_repeat_us.len() as f64;
    let mean = per_repeat_us.iter().sum::<f64>() / n;
    let var = per_repeat_us
        .iter()
        .map(|m| (m - mean).powi(2))
        .sum::<f64>()
        / n;
    samples_us.sort_by(f64::total_cmp);
    let rank = ((samples_us.len() as f64) * 0.99).ceil() as usize;
    let p99 = samples_us[rank.clamp(1, samples_us.len()) - 1];
    BenchStats {
        mean_us: mean,
        std_us: var.sqrt(),
        p99_us: p99,
        frames,
        repeats: per_repeat_us.len(),
        method,
    }
}

/// Times `push` on every frame, `repeats` times, after one warm-up pass.
pub fn bench_rapidhare<T: Scalar>(
    models: Arc<ActivityModelSet<T>>,
    cfg: &PredictorConfig<T>,
    frames: &FrameMatrix<T>,
    repeats: usize,
) -> Result<BenchStats> {
    check_sizes(frames.len(), repeats)?;
    let mut session = PredictorSession::new(models, cfg.clone())?;
    for x in frames.rows() {
        std::hint::black_box(session.push(x)?.label);
    }
    let mut per_repeat = Vec::with_capacity(repeats);
    let mut samples = Vec::with_capacity(frames.len() * repeats);
    for _ in 0..repeats {
        session.reset();
        let start = Instant::now();
        for x in frames.rows() {
            let t0 = Instant::now();
            std::hint::black_box(session.push(x)?.label);
            samples.push(t0.elapsed().as_secs_f64() * 1e6);
        }
        per_repeat.push(start.elapsed().as_secs_f64() * 1e6 / frames.len() as f64);
    }
    Ok(summarize(
        &per_repeat,
        samples,
        frames.len(),
        Method::RapidHare,
    ))
}

/// Times block Viterbi over consecutive blocks of `cfg.window_w` frames;
/// each block's time is divided by its length.
pub fn bench_hmm<T: Scalar>(
    models: &ActivityModelSet<T>,
    trans: &TransitionMatrix<T>,
    cfg: &HmmConfig<T>,
    frames: &FrameMatrix<T>,
    repeats: usize,
) -> Result<BenchStats> {
    check_sizes(frames.len(), repeats)?;
    cfg.validate(trans.n())?;
    let view = frames.view();
    let run = |samples: Option<&mut Vec<f64>>| -> Result<()> {
        let mut samples = samples;
        let mut prior = cfg.initial_probs.clone();
        let mut start = 0;
        while start < view.len() {
            let end = (start + cfg.window_w).min(view.len());
            let t0 = Instant::now();
            let path = viterbi_block(models, trans, &prior, view.slice(start..end))?;
            let last = *path.states.last().expect("non-empty block");
            prior.copy_from_slice(trans.row(last));
            std::hint::black_box(&path);
            if let Some(s) = samples.as_deref_mut() {
                let per_frame = t0.elapsed().as_secs_f64() * 1e6 / (end - start) as f64;
                s.extend(std::iter::repeat_n(per_frame, end - start));
            }
            start = end;
        }
        Ok(())
    };
    run(None)?;
    let mut per_repeat = Vec::with_capacity(repeats);
    let mut samples = Vec::with_capacity(frames.len() * repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        run(Some(&mut samples))?;
        per_repeat.push(start.elapsed().as_secs_f64() * 1e6 / frames.len() as f64);
    }
    Ok(summarize(&per_repeat, samples, frames.len(), Method::Hmm))
}
