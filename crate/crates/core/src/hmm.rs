//! Baseline HMM with mixture emissions, decoded by Viterbi over consecutive
//! non-overlapping blocks of frames.

use std::fs;
use std::path::Path;

use crate::data::{ActivityLabel, Frames, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::gmm::ActivityModelSet;
use crate::scalar::{lit, Scalar};

pub const DEFAULT_HMM_WINDOW: usize = 10;

/// Hand-set activity transition probabilities, activity-id order. Zero
/// entries forbid transitions such as sitting -> running.
pub const DEFAULT_TRANSITIONS: [[f64; N_ACTIVITIES]; N_ACTIVITIES] = [
    [0.99, 0.0025, 0.0025, 0.0025, 0.0, 0.0, 0.0, 0.0025],
    [0.0025, 0.99, 0.0025, 0.0025, 0.0, 0.0, 0.0, 0.0025],
    [0.005, 0.0, 0.99, 0.0, 0.0, 0.0, 0.0, 0.005],
    [0.005, 0.0, 0.0, 0.99, 0.0, 0.0, 0.0, 0.005],
    [0.0, 0.0, 0.0, 0.0, 0.99, 0.0, 0.01, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.01, 0.99, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.99, 0.01],
    [0.002, 0.002, 0.002, 0.002, 0.0, 0.002, 0.0, 0.99],
];

fn check_distribution<T: Scalar>(row: &[T], what: &str) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= T::zero())) {
        return Err(Error::InvalidConfig(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let total: T = row.iter().copied().sum();
    if (total - T::one()).abs() > lit::<T>(1e-9).max(T::normalization_tolerance()) {
        return Err(Error::InvalidConfig(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix<T> {
    n: usize,
    probs: Vec<T>,
    log_probs: Vec<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    /// Row-major `n x n`; `probs[i * n + j] = P(j | i)`.
    pub fn new(n: usize, probs: Vec<T>) -> Result<Self> {
        if n == 0 || probs.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "transition matrix needs {n}x{n} entries, got {}",
                probs.len()
            )));
        }
        for (i, row) in probs.chunks_exact(n).enumerate() {
            check_distribution(row, &format!("transition row {i}"))?;
        }
        // ln(0) = -inf keeps forbidden transitions out of every path
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self {
            n,
            probs,
            log_probs,
        })
    }

    pub fn default_activities() -> Self {
        let probs = DEFAULT_TRANSITIONS
            .iter()
            .flatten()
            .map(|p| lit::<T>(*p))
            .collect();
        Self::new(N_ACTIVITIES, probs).expect("built-in matrix is stochastic")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, from: usize, to: usize) -> T {
        self.probs[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[T] {
        &self.probs[from * self.n..(from + 1) * self.n]
    }

    pub fn log_prob(&self, from: usize, to: usize) -> T {
        self.log_probs[from * self.n + to]
    }

    /// Text form: one line of `n` activity names, then `n` rows of `n`
    /// decimals (whitespace-separated). Rows and columns are reordered into
    /// activity-id order.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "missing activity header"))?;
        let labels: Vec<ActivityLabel> = header
            .split_whitespace()
            .map(|name| {
                ActivityLabel::from_name(name).ok_or_else(|| {
                    Error::parse(source, hline, format!("unknown activity `{name}`"))
                })
            })
            .collect::<Result<_>>()?;
        let n = labels.len();
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::parse(source, hline, "duplicate activity in header"));
        }
        let mut probs = vec![T::zero(); n * n];
        let order = |l: &ActivityLabel| sorted.iter().position(|s| s == l).expect("present");
        for from in &labels {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| Error::parse(source, hline, "missing transition rows"))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(source, lno, format!("bad probability `{v}`")))
                })
                .collect::<Result<_>>()?;
            if values.len() != n {
                return Err(Error::parse(
                    source,
                    lno,
                    format!("row has {} entries, expected {n}", values.len()),
                ));
            }
            for (to, v) in labels.iter().zip(values) {
                probs[order(from) * n + order(to)] = lit(v);
            }
        }
        Self::new(n, probs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.to_string_lossy())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmmConfig<T> {
    pub window_w: usize,
    pub initial_probs: Vec<T>,
}

impl<T: Scalar> HmmConfig<T> {
    /// Uniform initial distribution over `n` states.
    pub fn uniform(n: usize, window_w: usize) -> Self {
        Self {
            window_w,
            initial_probs: vec![T::one() / lit(n as f64); n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.window_w == 0 {
            return Err(Error::InvalidConfig(
                "Viterbi window must be positive".into(),
            ));
        }
        if self.initial_probs.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{} initial probabilities for {n} states",
                self.initial_probs.len()
            )));
        }
        check_distribution(&self.initial_probs, "initial distribution")
    }
}

impl<T: Scalar> Default for HmmConfig<T> {
    fn default() -> Self {
        Self::uniform(N_ACTIVITIES, DEFAULT_HMM_WINDOW)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiPath<T> {
    /// State indices into the model set.
    pub states: Vec<usize>,
    pub labels: Vec<ActivityLabel>,
    /// Joint log-probability of the path and the observations.
    pub log_prob: T,
}

fn check_models<T: Scalar>(
    models: &ActivityModelSet<T>,
    trans: &TransitionMatrix<T>,
) -> Result<()> {
    if models.len() != trans.n() {
        return Err(Error::InvalidConfig(format!(
            "{} emission models for a {}-state transition matrix",
            models.len(),
            trans.n()
        )));
    }
    Ok(())
}

/// Most probable state path for one block given a prior over the first state.
/// Ties go to the lowest state index.
pub fn viterbi_block<T: Scalar>(
    models: &ActivityModelSet<T>,
    trans: &TransitionMatrix<T>,
    prior: &[T],
    frames: Frames<'_, T>,
) -> Result<ViterbiPath<T>> {
    check_models(models, trans)?;
    let n = trans.n();
    if prior.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} prior entries for {n} states",
            prior.len()
        )));
    }
    if frames.is_empty() {
        return Err(Error::InsufficientData(
            "Viterbi block has no frames".into(),
        ));
    }
    if frames.dim() != models.dim() {
        return Err(Error::DimensionMismatch {
            expected: models.dim(),
            actual: frames.dim(),
        });
    }
    let t_len = frames.len();
    let mut emission = vec![T::zero(); n];
    let mut delta = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut back = vec![0usize; t_len * n];

    models.log_likelihoods_into(frames.row(0), &mut emission);
    for s in 0..n {
        delta[s] = prior[s].ln() + emission[s];
    }
    check_column(&delta, 0)?;
    for t in 1..t_len {
        models.log_likelihoods_into(frames.row(t), &mut emission);
        for j in 0..n {
            let mut best = 0;
            let mut best_v = T::neg_infinity();
            for (i, d) in delta.iter().enumerate() {
                let v = *d + trans.log_prob(i, j);
                if v > best_v {
                    best_v = v;
                    best = i;
                }
            }
            back[t * n + j] = best;
            next[j] = best_v + emission[j];
        }
        std::mem::swap(&mut delta, &mut next);
        check_column(&delta, t)?;
    }

    let mut last = 0;
    for (s, v) in delta.iter().enumerate() {
        if *v > delta[last] {
            last = s;
        }
    }
    let log_prob = delta[last];
    let mut states = vec![0; t_len];
    states[t_len - 1] = last;
    for t in (1..t_len).rev() {
        states[t - 1] = back[t * n + states[t]];
    }
    let labels = states.iter().map(|&s| models.labels()[s]).collect();
    Ok(ViterbiPath {
        states,
        labels,
        log_prob,
    })
}

fn check_column<T: Scalar>(delta: &[T], t: usize) -> Result<()> {
    if delta.iter().all(|v| *v == T::neg_infinity()) {
        return Err(Error::Numeric(format!(
            "every state is impossible at frame {t}"
        )));
    }
    if delta.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric(format!("NaN Viterbi score at frame {t}")));
    }
    Ok(())
}

/// Decodes `frames` block by block. The first block starts from
/// `cfg.initial_probs`; each later block starts from the transition row of the
/// previous block's final state.
pub fn predict_stream_hmm<T: Scalar>(
    models: &ActivityModelSet<T>,
    trans: &TransitionMatrix<T>,
    cfg: &HmmConfig<T>,
    frames: Frames<'_, T>,
) -> Result<Vec<ActivityLabel>> {
    check_models(models, trans)?;
    cfg.validate(trans.n())?;
    if frames.is_empty() {
        return Err(Error::InsufficientData("nothing to decode".into()));
    }
    let mut labels = Vec::with_capacity(frames.len());
    let mut prior = cfg.initial_probs.clone();
    let mut start = 0;
    while start < frames.len() {
        let end = (start + cfg.window_w).min(frames.len());
        let path = viterbi_block(models, trans, &prior, frames.slice(start..end))?;
        let last = *path.states.last().expect("non-empty block");
        prior.copy_from_slice(trans.row(last));
        labels.extend(path.labels);
        start = end;
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FrameMatrix;
    use crate::gmm::{Component, GmmModel};

    fn unit(mean: f64) -> GmmModel<f64> {
        GmmModel::new(vec![Component {
            weight: 1.0,
            mean: vec![mean],
            variance: vec![0.01],
        }])
        .unwrap()
    }

    fn eight_models() -> ActivityModelSet<f64> {
        ActivityModelSet::new(
            ActivityLabel::ALL
                .iter()
                .map(|l| (*l, unit(l.index() as f64)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn default_matrix_values() {
        let m = TransitionMatrix::<f64>::default_activities();
        let (w, r, s, su, st) = (
            ActivityLabel::Walking.index(),
            ActivityLabel::Running.index(),
            ActivityLabel::Sitting.index(),
            ActivityLabel::StandingUp.index(),
            ActivityLabel::Standing.index(),
        );
        assert_eq!(m.prob(w, w), 0.99);
        assert_eq!(m.prob(w, r), 0.0025);
        assert_eq!(m.prob(s, r), 0.0);
        assert_eq!(m.prob(s, su), 0.01);
        assert_eq!(m.prob(st, ActivityLabel::SittingDown.index()), 0.002);
        assert_eq!(m.log_prob(s, r), f64::NEG_INFINITY);
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        assert!(TransitionMatrix::new(2, vec![0.5, 0.4, 0.0, 1.0]).is_err());
        assert!(TransitionMatrix::new(2, vec![1.5, -0.5, 0.0, 1.0]).is_err());
    }

    #[test]
    fn parse_reorders_into_id_order() {
        let text = "running walking\n0.2 0.8\n0.1 0.9\n";
        let m = TransitionMatrix::<f64>::parse(text, "mem").unwrap();
        // walking row: to walking 0.9, to running 0.1
        assert_eq!(m.row(0), &[0.9, 0.1]);
        assert_eq!(m.row(1), &[0.8, 0.2]);
        assert!(TransitionMatrix::<f64>::parse("walking\n0.5\n", "mem").is_err());
        assert!(TransitionMatrix::<f64>::parse("walking jogging\n", "mem").is_err());
    }

    #[test]
    fn single_frame_is_prior_plus_emission_argmax() {
        let models = eight_models();
        let trans = TransitionMatrix::default_activities();
        let mut prior = vec![0.0; 8];
        prior[2] = 0.7;
        prior[5] = 0.3;
        let frames = FrameMatrix::from_rows(1, [[4.0]]).unwrap();
        let path = viterbi_block(&models, &trans, &prior, frames.view()).unwrap();
        let best = (0..8)
            .max_by(|&a, &b| {
                let sa = (prior[a] as f64).ln() + models.models()[a].log_pdf(&[4.0]).unwrap();
                let sb = (prior[b] as f64).ln() + models.models()[b].log_pdf(&[4.0]).unwrap();
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        assert_eq!(path.states, vec![best]);
    }

    #[test]
    fn dominant_state_gives_constant_path() {
        let models = eight_models();
        let trans = TransitionMatrix::default_activities();
        let frames = FrameMatrix::from_rows(1, vec![[3.0]; 12]).unwrap();
        let labels =
            predict_stream_hmm(&models, &trans, &HmmConfig::default(), frames.view()).unwrap();
        assert!(labels.iter().all(|l| *l == ActivityLabel::GoingDown));
    }

    #[test]
    fn blocks_partition_the_stream() {
        let models = eight_models();
        let trans = TransitionMatrix::default_activities();
        for (len, w) in [(10usize, 10usize), (25, 10), (3, 10), (7, 1)] {
            let frames = FrameMatrix::from_rows(1, (0..len).map(|t| [(t % 8) as f64])).unwrap();
            let cfg = HmmConfig::uniform(8, w);
            let labels = predict_stream_hmm(&models, &trans, &cfg, frames.view()).unwrap();
            assert_eq!(labels.len(), len);
        }
    }

    #[test]
    fn forbidden_transition_never_decoded() {
        let models = eight_models();
        let trans = TransitionMatrix::default_activities();
        // sitting-like frames followed by running-like frames
        let rows: Vec<[f64; 1]> = (0..10).map(|t| if t < 5 { [4.0] } else { [1.0] }).collect();
        let frames = FrameMatrix::from_rows(1, rows).unwrap();
        let path = viterbi_block(&models, &trans, &[0.125; 8], frames.view()).unwrap();
        for w in path.labels.windows(2) {
            assert!(
                trans.prob(w[0].index(), w[1].index()) > 0.0,
                "{:?}",
                path.labels
            );
        }
    }

    #[test]
    fn bad_inputs() {
        let models = eight_models();
        let trans = TransitionMatrix::default_activities();
        let empty = FrameMatrix::<f64>::new(1);
        assert!(viterbi_block(&models, &trans, &[0.125; 8], empty.view()).is_err());
        let wrong_dim = FrameMatrix::from_rows(2, [[0.0, 0.0]]).unwrap();
        assert!(viterbi_block(&models, &trans, &[0.125; 8], wrong_dim.view()).is_err());
        let bad_cfg = HmmConfig {
            window_w: 0,
            initial_probs: vec![0.125; 8],
        };
        let one = FrameMatrix::from_rows(1, [[0.0]]).unwrap();
        assert!(predict_stream_hmm(&models, &trans, &bad_cfg, one.view()).is_err());
    }
}
