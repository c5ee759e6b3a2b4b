use std::fmt;

use super::{fit_em, EmConfig, GmmModel};
use crate::data::{ActivityLabel, Dataset, FrameMatrix, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mixture size per activity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComponentCounts([usize; N_ACTIVITIES]);

impl Default for ComponentCounts {
    /// Dynamic activities get many components, static ones few.
    fn default() -> Self {
        let mut counts = [0; N_ACTIVITIES];
        for (label, k) in [
            (ActivityLabel::Walking, 18),
            (ActivityLabel::Running, 18),
            (ActivityLabel::GoingUp, 16),
            (ActivityLabel::GoingDown, 16),
            (ActivityLabel::Sitting, 2),
            (ActivityLabel::StandingUp, 5),
            (ActivityLabel::SittingDown, 7),
            (ActivityLabel::Standing, 4),
        ] {
            counts[label.index()] = k;
        }
        Self(counts)
    }
}

impl ComponentCounts {
    pub fn uniform(k: usize) -> Self {
        Self([k; N_ACTIVITIES])
    }

    pub fn get(&self, label: ActivityLabel) -> usize {
        self.0[label.index()]
    }

    pub fn set(&mut self, label: ActivityLabel, k: usize) {
        self.0[label.index()] = k;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Applies `name=k` overrides separated by commas, e.g. `sitting=2,running=10`.
    pub fn apply_overrides(&mut self, spec: &str) -> Result<()> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, k) = item.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("component override `{item}` is not name=count"))
            })?;
            let label = ActivityLabel::from_name(name.trim()).ok_or_else(|| {
                Error::InvalidConfig(format!("unknown activity `{}`", name.trim()))
            })?;
            let k: usize = k.trim().parse().ok().filter(|k| *k > 0).ok_or_else(|| {
                Error::InvalidConfig(format!("component count for {label} must be positive"))
            })?;
            self.set(label, k);
        }
        Ok(())
    }
}

impl fmt::Display for ComponentCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = ActivityLabel::ALL
            .iter()
            .map(|l| format!("{}={}", l.name(), self.get(*l)))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// One mixture per activity, all over the same feature space. Entries are
/// kept in activity-id order; that order defines score and posterior vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityModelSet<T> {
    labels: Vec<ActivityLabel>,
    models: Vec<GmmModel<T>>,
    dim: usize,
}

impl<T: Scalar> ActivityModelSet<T> {
    pub fn new(entries: Vec<(ActivityLabel, GmmModel<T>)>) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|(l, _)| *l);
        if entries.is_empty() {
            return Err(Error::InvalidConfig("model set is empty".into()));
        }
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig(
                "duplicate activity in model set".into(),
            ));
        }
        let dim = entries[0].1.dim();
        if let Some((_, m)) = entries.iter().find(|(_, m)| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.dim(),
            });
        }
        let (labels, models) = entries.into_iter().unzip();
        Ok(Self {
            labels,
            models,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ActivityLabel] {
        &self.labels
    }

    pub fn models(&self) -> &[GmmModel<T>] {
        &self.models
    }

    pub fn get(&self, label: ActivityLabel) -> Option<&GmmModel<T>> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .map(|i| &self.models[i])
    }

    pub fn position(&self, label: ActivityLabel) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn total_components(&self) -> usize {
        self.models.iter().map(|m| m.n_components()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ActivityLabel, &GmmModel<T>)> {
        self.labels.iter().copied().zip(&self.models)
    }

    /// Per-activity log-densities of `x` written into `out` (len = number
    /// of activities). `x.len()` must equal [`ActivityModelSet::dim`].
    #[inline]
    pub fn log_likelihoods_into(&self, x: &[T], out: &mut [T]) {
        for (o, m) in out.iter_mut().zip(&self.models) {
            *o = m.log_pdf_unchecked(x);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Result<ActivityModelSet<U>> {
        ActivityModelSet::new(
            self.iter()
                .map(|(l, m)| m.cast::<U>().map(|m| (l, m)))
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainedActivity<T> {
    pub label: ActivityLabel,
    pub n_frames: usize,
    pub components: usize,
    pub final_loglik: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits one mixture per activity on all training frames carrying that label.
/// Activity `a` uses EM seed `cfg.seed + id(a)`.
pub fn train_activity_models<T: Scalar>(
    train: &Dataset<T>,
    counts: &ComponentCounts,
    cfg: &EmConfig,
) -> Result<(ActivityModelSet<T>, Vec<TrainedActivity<T>>)> {
    let dim = train
        .sequences
        .first()
        .map(|s| s.dim())
        .ok_or_else(|| Error::InsufficientData("training set is empty".into()))?;
    let mut pooled: Vec<FrameMatrix<T>> =
        (0..N_ACTIVITIES).map(|_| FrameMatrix::new(dim)).collect();
    for seq in &train.sequences {
        for (frame, label) in seq.frames.rows().zip(&seq.labels) {
            pooled[label.index()].push(frame)?;
        }
    }
    let mut entries = Vec::with_capacity(N_ACTIVITIES);
    let mut summary = Vec::with_capacity(N_ACTIVITIES);
    for label in ActivityLabel::ALL {
        let data = &pooled[label.index()];
        let k = counts.get(label);
        if data.len() < k {
            return Err(Error::InsufficientData(format!(
                "activity {label} has {} training frames, needs at least {k}",
                data.len()
            )));
        }
        let activity_cfg = EmConfig {
            seed: cfg.seed.wrapping_add(label.id() as u64),
            ..cfg.clone()
        };
        let fit = fit_em(data.view(), k, &activity_cfg)?;
        summary.push(TrainedActivity {
            label,
            n_frames: data.len(),
            components: k,
            final_loglik: fit.final_loglik,
            iterations: fit.loglik_trace.len(),
            converged: fit.converged,
        });
        entries.push((label, fit.model));
    }
    Ok((ActivityModelSet::new(entries)?, summary))
}
