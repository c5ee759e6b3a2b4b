//! Streaming rolling-window classifier.
//!
//! For each incoming frame every activity's mixture is evaluated once; the
//! per-frame log-densities go into a ring holding the last `K + 1` frames and
//! the per-activity window sums are updated by adding the new value and
//! subtracting the evicted one. The prediction is the arg-max of the sums
//! (plus log-priors when configured). During warm-up the window holds every
//! frame seen so far.

use std::sync::Arc;

use crate::data::{ActivityLabel, Frames};
use crate::error::{Error, Result};
use crate::gmm::ActivityModelSet;
use crate::scalar::{lit, Scalar};

pub const DEFAULT_WINDOW_K: usize = 26;
pub const DEFAULT_RESYNC_INTERVAL: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorConfig<T> {
    /// Context length: the window spans `window_k + 1` frames.
    pub window_k: usize,
    /// Per-activity log-priors in model-set order; `None` means uniform.
    pub log_priors: Option<Vec<T>>,
    /// Window sums are recomputed exactly from the ring this often.
    pub resync_interval: usize,
}

impl<T: Scalar> Default for PredictorConfig<T> {
    fn default() -> Self {
        Self {
            window_k: DEFAULT_WINDOW_K,
            log_priors: None,
            resync_interval: DEFAULT_RESYNC_INTERVAL,
        }
    }
}

impl<T: Scalar> PredictorConfig<T> {
    pub fn with_window(window_k: usize) -> Self {
        Self {
            window_k,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_activities: usize) -> Result<()> {
        if self.resync_interval == 0 {
            return Err(Error::InvalidConfig(
                "resync_interval must be positive".into(),
            ));
        }
        if let Some(lp) = &self.log_priors {
            if lp.len() != n_activities {
                return Err(Error::InvalidConfig(format!(
                    "{} log-priors for {n_activities} activities",
                    lp.len()
                )));
            }
            if lp.iter().any(|v| v.is_nan() || *v == T::infinity()) {
                return Err(Error::InvalidConfig(
                    "log-priors must not be NaN or +inf".into(),
                ));
            }
            let total: T = lp.iter().map(|v| v.exp()).sum();
            let tol: T = lit::<T>(1e-9).max(T::normalization_tolerance());
            if (total - T::one()).abs() > tol {
                return Err(Error::InvalidConfig(format!(
                    "exp(log_priors) sums to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub label: ActivityLabel,
    /// Window log-likelihood sums (plus log-prior), model-set order.
    pub scores: Vec<T>,
    pub posterior: Vec<T>,
}

impl<T: Scalar> Prediction<T> {
    fn empty(labels: &[ActivityLabel]) -> Self {
        Self {
            label: labels[0],
            scores: vec![T::zero(); labels.len()],
            posterior: vec![T::zero(); labels.len()],
        }
    }
}

/// Index of the maximum; the first (lowest) index wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax of `scores + log_priors` with max subtraction.
pub fn posterior<T: Scalar>(scores: &[T], log_priors: Option<&[T]>) -> Vec<T> {
    let mut out = vec![T::zero(); scores.len()];
    posterior_into(scores, log_priors, &mut out);
    out
}

pub fn posterior_into<T: Scalar>(scores: &[T], log_priors: Option<&[T]>, out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = scores[i] + log_priors.map_or(T::zero(), |lp| lp[i]);
    }
    let max = out[argmax(out)];
    let mut total = T::zero();
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total = total + *o;
    }
    out.iter_mut().for_each(|o| *o = *o / total);
}

/// Single-writer streaming state; share the models via `Arc` across sessions.
#[derive(Clone, Debug)]
pub struct PredictorSession<T> {
    models: Arc<ActivityModelSet<T>>,
    cfg: PredictorConfig<T>,
    n: usize,
    capacity: usize,
    /// `capacity` slots of `n` log-likelihoods each.
    ring: Vec<T>,
    head: usize,
    len: usize,
    window_sums: Vec<T>,
    frames_seen: u64,
    evaluations: u64,
    prediction: Prediction<T>,
}

impl<T: Scalar> PredictorSession<T> {
    pub fn new(models: Arc<ActivityModelSet<T>>, cfg: PredictorConfig<T>) -> Result<Self> {
        let n = models.len();
        cfg.validate(n)?;
        let capacity = cfg.window_k + 1;
        let prediction = Prediction::empty(models.labels());
        Ok(Self {
            models,
            cfg,
            n,
            capacity,
            ring: vec![T::zero(); capacity * n],
            head: 0,
            len: 0,
            window_sums: vec![T::zero(); n],
            frames_seen: 0,
            evaluations: 0,
            prediction,
        })
    }

    pub fn config(&self) -> &PredictorConfig<T> {
        &self.cfg
    }

    pub fn models(&self) -> &ActivityModelSet<T> {
        &self.models
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Number of mixture density evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Frames currently in the window: `min(frames_seen, K + 1)`.
    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn window_sums(&self) -> &[T] {
        &self.window_sums
    }

    pub fn reset(&mut self) {
        self.head = 0;
        self.len = 0;
        self.window_sums.iter_mut().for_each(|s| *s = T::zero());
        self.frames_seen = 0;
    }

    /// Consumes one frame and returns the prediction for it. The returned
    /// reference points into session-owned buffers; no allocation happens.
    pub fn push(&mut self, x: &[T]) -> Result<&Prediction<T>> {
        if x.len() != self.models.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.models.dim(),
                actual: x.len(),
            });
        }
        let n = self.n;
        let slot = if self.len < self.capacity {
            let slot = (self.head + self.len) % self.capacity;
            self.len += 1;
            slot
        } else {
            let slot = self.head;
            let evicted = &self.ring[slot * n..(slot + 1) * n];
            for (s, e) in self.window_sums.iter_mut().zip(evicted) {
                *s = *s - *e;
            }
            self.head = (self.head + 1) % self.capacity;
            slot
        };
        let values = &mut self.ring[slot * n..(slot + 1) * n];
        self.models.log_likelihoods_into(x, values);
        self.evaluations += n as u64;
        for (s, v) in self.window_sums.iter_mut().zip(values.iter()) {
            *s = *s + *v;
        }
        self.frames_seen += 1;
        if self
            .frames_seen
            .is_multiple_of(self.cfg.resync_interval as u64)
        {
            self.resync();
        }

        let pred = &mut self.prediction;
        match &self.cfg.log_priors {
            Some(lp) => {
                for ((sc, s), p) in pred.scores.iter_mut().zip(&self.window_sums).zip(lp) {
                    *sc = *s + *p;
                }
            }
            None => pred.scores.copy_from_slice(&self.window_sums),
        }
        pred.label = self.models.labels()[argmax(&pred.scores)];
        posterior_into(&pred.scores, None, &mut pred.posterior);
        Ok(&self.prediction)
    }

    /// Recomputes the window sums exactly from the ring, oldest frame first.
    pub fn resync(&mut self) {
        let n = self.n;
        self.window_sums.iter_mut().for_each(|s| *s = T::zero());
        for i in 0..self.len {
            let slot = (self.head + i) % self.capacity;
            for (s, v) in self
                .window_sums
                .iter_mut()
                .zip(&self.ring[slot * n..(slot + 1) * n])
            {
                *s = *s + *v;
            }
        }
    }
}

/// Reference implementation without caching: for every frame, recomputes
/// `Σ_{k=0}^{min(t,K)} ln p(x_{t-k} | s)` from scratch. Returns the
/// per-frame score vectors (sums plus log-priors).
pub fn naive_window_scores<T: Scalar>(
    models: &ActivityModelSet<T>,
    frames: Frames<'_, T>,
    cfg: &PredictorConfig<T>,
) -> Result<Vec<Vec<T>>> {
    cfg.validate(models.len())?;
    if !frames.is_empty() && frames.dim() != models.dim() {
        return Err(Error::DimensionMismatch {
            expected: models.dim(),
            actual: frames.dim(),
        });
    }
    let mut out = Vec::with_capacity(frames.len());
    for t in 0..frames.len() {
        let scores: Vec<T> = models
            .models()
            .iter()
            .enumerate()
            .map(|(s, m)| {
                let mut sum = T::zero();
                for k in 0..=t.min(cfg.window_k) {
                    sum = sum + m.log_pdf_unchecked(frames.row(t - k));
                }
                sum + cfg.log_priors.as_ref().map_or(T::zero(), |lp| lp[s])
            })
            .collect();
        out.push(scores);
    }
    Ok(out)
}

pub fn predict_sequence_naive<T: Scalar>(
    models: &ActivityModelSet<T>,
    frames: Frames<'_, T>,
    cfg: &PredictorConfig<T>,
) -> Result<Vec<ActivityLabel>> {
    Ok(naive_window_scores(models, frames, cfg)?
        .iter()
        .map(|s| models.labels()[argmax(s)])
        .collect())
}

/// Streams `frames` through a fresh session and collects the labels.
pub fn predict_sequence<T: Scalar>(
    models: Arc<ActivityModelSet<T>>,
    frames: Frames<'_, T>,
    cfg: &PredictorConfig<T>,
) -> Result<Vec<ActivityLabel>> {
    let mut session = PredictorSession::new(models, cfg.clone())?;
    frames
        .rows()
        .map(|x| session.push(x).map(|p| p.label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FrameMatrix;
    use crate::gmm::{Component, GmmModel};

    fn unit_model(mean: f64) -> GmmModel<f64> {
        GmmModel::new(vec![Component {
            weight: 1.0,
            mean: vec![mean],
            variance: vec![1.0],
        }])
        .unwrap()
    }

    fn two_models(a: f64, b: f64) -> Arc<ActivityModelSet<f64>> {
        Arc::new(
            ActivityModelSet::new(vec![
                (ActivityLabel::Walking, unit_model(a)),
                (ActivityLabel::Running, unit_model(b)),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn new_session_is_empty() {
        let s = PredictorSession::new(two_models(0.0, 1.0), PredictorConfig::default()).unwrap();
        assert_eq!(s.frames_seen(), 0);
        assert_eq!(s.window_len(), 0);
    }

    #[test]
    fn unnormalized_priors_rejected() {
        let cfg = PredictorConfig {
            log_priors: Some(vec![0.0, 0.0]),
            ..PredictorConfig::default()
        };
        assert!(PredictorSession::new(two_models(0.0, 1.0), cfg).is_err());
    }

    #[test]
    fn zero_window_is_single_frame_argmax() {
        let models = two_models(-1.0, 1.0);
        let mut s = PredictorSession::new(models.clone(), PredictorConfig::with_window(0)).unwrap();
        for x in [-2.0, 0.5, -0.1, 3.0, 0.0] {
            let p = s.push(&[x]).unwrap().clone();
            let a = models.models()[0].log_pdf(&[x]).unwrap();
            let b = models.models()[1].log_pdf(&[x]).unwrap();
            let expect = if b > a {
                ActivityLabel::Running
            } else {
                ActivityLabel::Walking
            };
            assert_eq!(p.label, expect, "x={x}");
            assert_eq!(s.window_len(), 1);
        }
    }

    #[test]
    fn identical_models_tie_to_lowest_id() {
        let models = Arc::new(
            ActivityModelSet::new(vec![
                (ActivityLabel::Standing, unit_model(0.0)),
                (ActivityLabel::Sitting, unit_model(0.0)),
            ])
            .unwrap(),
        );
        let mut s = PredictorSession::new(models, PredictorConfig::default()).unwrap();
        for t in 0..50 {
            let p = s.push(&[t as f64 * 0.1 - 2.0]).unwrap();
            assert_eq!(p.scores[0], p.scores[1]);
            assert_eq!(p.label, ActivityLabel::Sitting);
        }
    }

    #[test]
    fn window_grows_then_saturates() {
        let mut s =
            PredictorSession::new(two_models(0.0, 1.0), PredictorConfig::with_window(3)).unwrap();
        for t in 1..=10 {
            s.push(&[0.0]).unwrap();
            assert_eq!(s.window_len(), t.min(4));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut s =
            PredictorSession::new(two_models(0.0, 1.0), PredictorConfig::default()).unwrap();
        assert!(matches!(
            s.push(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn posterior_examples() {
        let p = posterior(&[1.5f64; 8], None);
        assert!(p.iter().all(|v| (v - 0.125).abs() < 1e-15));
        let p = posterior(&[0.0, 3f64.ln()], None);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let a = posterior(&[-3.0f64, 2.0, 0.5], None);
        let b = posterior(&[997.0f64, 1002.0, 1000.5], None);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_empty_and_single_frame() {
        let models = two_models(-1.0, 1.0);
        let empty = FrameMatrix::<f64>::new(1);
        assert!(
            predict_sequence_naive(&models, empty.view(), &PredictorConfig::default())
                .unwrap()
                .is_empty()
        );
        let one = FrameMatrix::from_rows(1, [[0.9]]).unwrap();
        assert_eq!(
            predict_sequence_naive(&models, one.view(), &PredictorConfig::default()).unwrap(),
            vec![ActivityLabel::Running]
        );
    }

    #[test]
    fn priors_shift_scores_and_posterior() {
        let cfg = PredictorConfig {
            log_priors: Some(vec![0.9f64.ln(), 0.1f64.ln()]),
            ..PredictorConfig::with_window(0)
        };
        let mut s = PredictorSession::new(two_models(0.0, 0.0), cfg).unwrap();
        let p = s.push(&[0.3]).unwrap();
        assert_eq!(p.label, ActivityLabel::Walking);
        assert!((p.posterior[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn resync_keeps_sums_consistent() {
        let cfg = PredictorConfig {
            resync_interval: 7,
            ..PredictorConfig::with_window(5)
        };
        let models = two_models(-0.5, 0.5);
        let mut s = PredictorSession::new(models, cfg).unwrap();
        for t in 0..100 {
            s.push(&[(t as f64 * 0.37).sin()]).unwrap();
        }
        let before = s.window_sums().to_vec();
        s.resync();
        for (a, b) in before.iter().zip(s.window_sums()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
