//! Confusion matrices, per-activity metrics, border tolerance and the
//! leave-one-subject-out driver.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::data::{ActivityLabel, Dataset, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::gmm::{train_activity_models, ComponentCounts, EmConfig};
use crate::hmm::{predict_stream_hmm, HmmConfig, TransitionMatrix};
use crate::predictor::{predict_sequence, PredictorConfig};
use crate::scalar::Scalar;

/// Square count matrix; rows are true classes, columns predicted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(Self {
            n,
            counts: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.n + predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn correct(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

pub fn confusion(truth: &[ActivityLabel], predicted: &[ActivityLabel]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let mut m = ConfusionMatrix::zeros(N_ACTIVITIES);
    for (t, p) in truth.iter().zip(predicted) {
        m.add(t.index(), p.index());
    }
    Ok(m)
}

/// Percentages in `[0, 100]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// One-vs-rest: `(TP + TN) / total`.
    pub accuracy: f64,
}

impl ClassMetrics {
    fn mean(items: &[ClassMetrics]) -> ClassMetrics {
        if items.is_empty() {
            return ClassMetrics::default();
        }
        let n = items.len() as f64;
        ClassMetrics {
            recall: items.iter().map(|m| m.recall).sum::<f64>() / n,
            precision: items.iter().map(|m| m.precision).sum::<f64>() / n,
            f1: items.iter().map(|m| m.f1).sum::<f64>() / n,
            accuracy: items.iter().map(|m| m.accuracy).sum::<f64>() / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub per_activity: Vec<ClassMetrics>,
    /// Unweighted mean over classes.
    pub macro_avg: ClassMetrics,
    pub confusion: ConfusionMatrix,
    pub tolerance_frames: usize,
}

impl EvalReport {
    /// Overall frame accuracy in percent (trace over total).
    pub fn frame_accuracy(&self) -> f64 {
        let total = self.confusion.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.confusion.correct() as f64 / total as f64
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Per-class recall, precision, F1 and one-vs-rest accuracy; classes without
/// support report zeros and still count toward the macro average.
pub fn metrics(conf: &ConfusionMatrix) -> (Vec<ClassMetrics>, ClassMetrics) {
    let n = conf.n_classes();
    let total = conf.total();
    let per: Vec<ClassMetrics> = (0..n)
        .map(|c| {
            let tp = conf.get(c, c);
            let support: u64 = (0..n).map(|j| conf.get(c, j)).sum();
            let predicted: u64 = (0..n).map(|i| conf.get(i, c)).sum();
            let fneg = support - tp;
            let fpos = predicted - tp;
            let tn = total - tp - fneg - fpos;
            let recall = ratio(tp, support);
            let precision = ratio(tp, predicted);
            let f1 = if recall + precision > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                recall,
                precision,
                f1,
                accuracy: ratio(tp + tn, total),
            }
        })
        .collect();
    let macro_avg = ClassMetrics::mean(&per);
    (per, macro_avg)
}

pub fn report(conf: ConfusionMatrix, tolerance_frames: usize) -> EvalReport {
    let (per_activity, macro_avg) = metrics(&conf);
    EvalReport {
        per_activity,
        macro_avg,
        confusion: conf,
        tolerance_frames,
    }
}

/// Maximal runs of equal labels as `(start, end)` half-open ranges.
fn segments(labels: &[ActivityLabel]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            out.push((start, t));
            start = t;
        }
    }
    out
}

fn tolerance_pass(
    truth: &[ActivityLabel],
    predicted: &mut [ActivityLabel],
    segs: &[(usize, usize)],
    tol: usize,
) -> bool {
    let source = predicted.to_vec();
    let mut changed = false;
    for pair in segs.windows(2) {
        let (a_start, boundary) = pair[0];
        let (_, b_end) = pair[1];
        let a = truth[a_start];
        let b = truth[boundary];
        let b_zone_end = (boundary + tol).min(b_end);
        let recognized_region = if b_zone_end < b_end {
            b_zone_end..b_end
        } else {
            boundary..b_end
        };
        if !source[recognized_region].contains(&b) {
            continue;
        }
        let a_zone_start = boundary.saturating_sub(tol).max(a_start);
        for p in &mut predicted[a_zone_start..boundary] {
            if *p == b {
                *p = a;
                changed = true;
            }
        }
        for p in &mut predicted[boundary..b_zone_end] {
            if *p == a {
                *p = b;
                changed = true;
            }
        }
    }
    changed
}

/// Forgives A/B swaps within `tol` frames of each ground-truth boundary
/// A -> B, provided B is recognized somewhere in its segment past the
/// tolerant zone (anywhere in it, for segments no longer than `tol`).
/// Passes repeat until nothing changes, so the result is idempotent.
pub fn apply_border_tolerance(
    truth: &[ActivityLabel],
    predicted: &[ActivityLabel],
    tol: usize,
) -> Result<Vec<ActivityLabel>> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let mut out = predicted.to_vec();
    if tol == 0 || truth.is_empty() {
        return Ok(out);
    }
    let segs = segments(truth);
    while tolerance_pass(truth, &mut out, &segs, tol) {}
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    #[default]
    RapidHare,
    Hmm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RapidHare => "rapidhare",
            Method::Hmm => "hmm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rapidhare" => Ok(Method::RapidHare),
            "hmm" => Ok(Method::Hmm),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CvConfig<T> {
    pub counts: ComponentCounts,
    pub em: EmConfig,
    pub features: FeatureConfig,
    pub predictor: PredictorConfig<T>,
    pub tolerance: usize,
    pub method: Method,
    pub hmm: HmmConfig<T>,
    /// `None` uses the built-in activity transition matrix.
    pub transitions: Option<TransitionMatrix<T>>,
    /// Folds evaluated concurrently.
    pub jobs: usize,
}

impl<T: Scalar> Default for CvConfig<T> {
    fn default() -> Self {
        Self {
            counts: ComponentCounts::default(),
            em: EmConfig::default(),
            features: FeatureConfig::default(),
            predictor: PredictorConfig::default(),
            tolerance: 25,
            method: Method::RapidHare,
            hmm: HmmConfig::default(),
            transitions: None,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FoldReport {
    pub test_subject: String,
    pub validation_subject: String,
    pub raw: EvalReport,
    pub tolerant: EvalReport,
}

#[derive(Clone, Debug)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Metrics averaged over folds; confusion summed.
    pub raw: EvalReport,
    pub tolerant: EvalReport,
}

fn average_reports<'a>(
    reports: impl Iterator<Item = &'a EvalReport> + Clone,
    tol: usize,
) -> EvalReport {
    let list: Vec<&EvalReport> = reports.collect();
    let n_classes = list.first().map_or(N_ACTIVITIES, |r| r.per_activity.len());
    let mut confusion = ConfusionMatrix::zeros(n_classes);
    for r in &list {
        confusion.merge(&r.confusion).expect("same class count");
    }
    let per_activity = (0..n_classes)
        .map(|c| {
            let items: Vec<ClassMetrics> = list.iter().map(|r| r.per_activity[c]).collect();
            ClassMetrics::mean(&items)
        })
        .collect();
    let macros: Vec<ClassMetrics> = list.iter().map(|r| r.macro_avg).collect();
    EvalReport {
        per_activity,
        macro_avg: ClassMetrics::mean(&macros),
        confusion,
        tolerance_frames: tol,
    }
}

fn run_fold<T: Scalar>(
    dataset: &Dataset<T>,
    subject: &str,
    cfg: &CvConfig<T>,
) -> Result<FoldReport> {
    let split = dataset.split_loso(subject)?;
    let train = cfg.features.apply_dataset(&split.train)?;
    let test = cfg.features.apply_dataset(&split.test)?;
    let (models, _) = train_activity_models(&train, &cfg.counts, &cfg.em)?;
    let models = Arc::new(models);
    let trans = match (&cfg.transitions, cfg.method) {
        (_, Method::RapidHare) => None,
        (Some(t), Method::Hmm) => Some(t.clone()),
        (None, Method::Hmm) => Some(TransitionMatrix::default_activities()),
    };
    let mut raw = ConfusionMatrix::zeros(N_ACTIVITIES);
    let mut tolerant = ConfusionMatrix::zeros(N_ACTIVITIES);
    for seq in &test.sequences {
        let predicted = match cfg.method {
            Method::RapidHare => {
                predict_sequence(models.clone(), seq.frames.view(), &cfg.predictor)?
            }
            Method::Hmm => predict_stream_hmm(
                &models,
                trans.as_ref().expect("set for the HMM method"),
                &cfg.hmm,
                seq.frames.view(),
            )?,
        };
        raw.merge(&confusion(&seq.labels, &predicted)?)?;
        let adjusted = apply_border_tolerance(&seq.labels, &predicted, cfg.tolerance)?;
        tolerant.merge(&confusion(&seq.labels, &adjusted)?)?;
    }
    Ok(FoldReport {
        test_subject: subject.to_string(),
        validation_subject: split.validation_subject,
        raw: report(raw, 0),
        tolerant: report(tolerant, cfg.tolerance),
    })
}

/// Leave-one-subject-out cross-validation over every subject.
pub fn run_cv<T: Scalar>(dataset: &Dataset<T>, cfg: &CvConfig<T>) -> Result<CvReport> {
    let subjects = dataset.subjects();
    if subjects.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "cross-validation needs at least 3 subjects, found {}",
            subjects.len()
        )));
    }
    cfg.features.validate(dataset.channels.len())?;
    let jobs = cfg.jobs.max(1).min(subjects.len());
    let folds: Vec<Result<FoldReport>> = if jobs == 1 {
        subjects.iter().map(|s| run_fold(dataset, s, cfg)).collect()
    } else {
        let mut slots: Vec<Option<Result<FoldReport>>> =
            (0..subjects.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|worker| {
                    let subjects = &subjects;
                    scope.spawn(move || {
                        (worker..subjects.len())
                            .step_by(jobs)
                            .map(|i| (i, run_fold(dataset, &subjects[i], cfg)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("fold worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every fold ran"))
            .collect()
    };
    let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
    let raw = average_reports(folds.iter().map(|f| &f.raw), 0);
    let tolerant = average_reports(folds.iter().map(|f| &f.tolerant), cfg.tolerance);
    Ok(CvReport {
        folds,
        raw,
        tolerant,
    })
}

/// Tab-separated report: one row per metric, one column per class plus the
/// average, followed by the confusion matrix. `precise` keeps full float
/// precision; otherwise values are rounded to two decimals.
pub fn format_report(rep: &EvalReport, precise: bool) -> String {
    let fmt = |v: f64| {
        if precise {
            format!("{v}")
        } else {
            format!("{v:.2}")
        }
    };
    let titles: Vec<&str> = (0..rep.per_activity.len())
        .map(|i| ActivityLabel::from_index(i).map_or("?", |l| l.title()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "\t{}\tAverage", titles.join("\t"));
    type Getter = fn(&ClassMetrics) -> f64;
    let rows: [(&str, Getter); 4] = [
        ("Recall", |m| m.recall),
        ("Precision", |m| m.precision),
        ("F1 score", |m| m.f1),
        ("Accuracy", |m| m.accuracy),
    ];
    for (name, get) in rows {
        let values: Vec<String> = rep.per_activity.iter().map(|m| fmt(get(m))).collect();
        let _ = writeln!(
            out,
            "{name}\t{}\t{}",
            values.join("\t"),
            fmt(get(&rep.macro_avg))
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "\t{}", titles.join("\t"));
    for (i, title) in titles.iter().enumerate() {
        let row: Vec<String> = (0..rep.confusion.n_classes())
            .map(|j| rep.confusion.get(i, j).to_string())
            .collect();
        let _ = writeln!(out, "{title}\t{}", row.join("\t"));
    }
    out
}
