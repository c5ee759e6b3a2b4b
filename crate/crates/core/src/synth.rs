//! Synthetic labeled recordings drawn from known per-activity mixtures.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{
    ActivityLabel, ChannelKind, ChannelSpec, Dataset, FrameMatrix, LabeledSequence,
    DEFAULT_SAMPLE_RATE_HZ, N_ACTIVITIES,
};
use crate::error::{Error, Result};
use crate::gmm::{ActivityModelSet, Component, GmmModel};
use crate::hmm::TransitionMatrix;

/// Sign patterns over the 3-bit activity index. Any two activities differ
/// in sign on 3 or 4 of the first six channels.
const SIGN_MASKS: [u32; 7] = [1, 2, 4, 3, 5, 6, 7];

const CHANNEL_NAMES: [&str; 6] = [
    "acc_rt_x", "acc_rt_y", "acc_rt_z", "acc_lt_x", "acc_lt_y", "acc_lt_z",
];

/// Which segment-level chain to use when building a spec from parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChainKind {
    /// Every other activity equally likely after a segment ends.
    #[default]
    Uniform,
    /// The built-in HMM transition matrix.
    Activities,
}

/// Plain parameters for [`SynthSpec::from_params`], readable from a
/// `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub n_subjects: usize,
    pub frames_per_subject: usize,
    pub dim: usize,
    pub min_segment: usize,
    pub seed: u64,
    /// Magnitude of the generator means, inside `[-1, 1]`.
    pub separation: f64,
    /// Per-channel standard deviation of every generator component.
    pub sigma: f64,
    pub chain: ChainKind,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_subjects: 3,
            frames_per_subject: 20_000,
            dim: 6,
            min_segment: 200,
            seed: 0,
            separation: 0.6,
            sigma: 0.02,
            chain: ChainKind::Uniform,
        }
    }
}

impl SynthParams {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut p = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::parse(source, i + 1, msg);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || err(format!("bad value `{value}` for `{key}`"));
            match key {
                "n_subjects" => p.n_subjects = value.parse().map_err(|_| bad())?,
                "frames_per_subject" => p.frames_per_subject = value.parse().map_err(|_| bad())?,
                "dim" => p.dim = value.parse().map_err(|_| bad())?,
                "min_segment" => p.min_segment = value.parse().map_err(|_| bad())?,
                "seed" => p.seed = value.parse().map_err(|_| bad())?,
                "separation" => p.separation = value.parse().map_err(|_| bad())?,
                "sigma" => p.sigma = value.parse().map_err(|_| bad())?,
                "chain" => {
                    p.chain = match value {
                        "uniform" => ChainKind::Uniform,
                        "activities" => ChainKind::Activities,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.to_string_lossy())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub frames_per_subject: usize,
    pub dim: usize,
    /// Ground-truth emission model per activity.
    pub generators: ActivityModelSet<f64>,
    /// Segment-level chain: row `i` gives the next activity after a segment of `i`.
    pub activity_chain: TransitionMatrix<f64>,
    pub min_segment: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::from_params(&SynthParams::default()).expect("default parameters are valid")
    }
}

/// Two-component mixture per activity whose means follow the activity's
/// sign pattern at magnitudes `separation` and `0.75 * separation`.
pub fn separated_generators(
    dim: usize,
    separation: f64,
    sigma: f64,
) -> Result<ActivityModelSet<f64>> {
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "synthetic dim must be positive".into(),
        ));
    }
    if !(separation > 0.0 && separation <= 1.0 && sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need 0 < separation <= 1 and sigma > 0, got {separation} and {sigma}"
        )));
    }
    let entries = ActivityLabel::ALL
        .iter()
        .map(|&label| {
            let a = label.index() as u32;
            let signs: Vec<f64> = (0..dim)
                .map(|d| {
                    if (a & SIGN_MASKS[d % SIGN_MASKS.len()]).count_ones() % 2 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                })
                .collect();
            let component = |scale: f64| Component {
                weight: 0.5,
                mean: signs.iter().map(|s| s * separation * scale).collect(),
                variance: vec![sigma * sigma; dim],
            };
            GmmModel::new(vec![component(1.0), component(0.75)]).map(|m| (label, m))
        })
        .collect::<Result<Vec<_>>>()?;
    ActivityModelSet::new(entries)
}

/// Uniform over the other activities.
pub fn uniform_chain() -> TransitionMatrix<f64> {
    let off = 1.0 / (N_ACTIVITIES - 1) as f64;
    let probs = (0..N_ACTIVITIES * N_ACTIVITIES)
        .map(|k| {
            if k / N_ACTIVITIES == k % N_ACTIVITIES {
                0.0
            } else {
                off
            }
        })
        .collect();
    TransitionMatrix::new(N_ACTIVITIES, probs).expect("uniform chain is stochastic")
}

pub fn synth_channels(dim: usize) -> Vec<ChannelSpec> {
    (0..dim)
        .map(|d| match CHANNEL_NAMES.get(d) {
            Some(name) => ChannelSpec::new(*name, ChannelKind::Accel),
            None => ChannelSpec::new(format!("acc_{d}"), ChannelKind::Accel),
        })
        .collect()
}

impl SynthSpec {
    pub fn from_params(p: &SynthParams) -> Result<Self> {
        let spec = Self {
            n_subjects: p.n_subjects,
            frames_per_subject: p.frames_per_subject,
            dim: p.dim,
            generators: separated_generators(p.dim, p.separation, p.sigma)?,
            activity_chain: match p.chain {
                ChainKind::Uniform => uniform_chain(),
                ChainKind::Activities => TransitionMatrix::default_activities(),
            },
            min_segment: p.min_segment,
            seed: p.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.frames_per_subject == 0 || self.min_segment == 0 {
            return Err(Error::InvalidConfig(
                "subjects, frames per subject and minimum segment must be positive".into(),
            ));
        }
        if self.generators.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: self.generators.dim(),
            });
        }
        if self.generators.len() != N_ACTIVITIES || self.activity_chain.n() != N_ACTIVITIES {
            return Err(Error::InvalidConfig(format!(
                "synthetic data needs generators and a chain over all {N_ACTIVITIES} activities"
            )));
        }
        Ok(())
    }
}

fn sample_index(rng: &mut ChaCha8Rng, probs: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_labels(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<ActivityLabel> {
    let n = spec.frames_per_subject;
    let mut labels = Vec::with_capacity(n);
    let mut state = rng.random_range(0..N_ACTIVITIES);
    while labels.len() < n {
        let len = rng.random_range(spec.min_segment..=2 * spec.min_segment);
        let remaining = n - labels.len();
        // never leave a tail shorter than the minimum segment
        let len = if remaining - len.min(remaining) < spec.min_segment {
            remaining
        } else {
            len
        };
        let label = spec.generators.labels()[state];
        labels.extend(std::iter::repeat_n(label, len));
        state = sample_index(rng, spec.activity_chain.row(state).iter().copied());
    }
    labels
}

fn sample_frame(
    model: &GmmModel<f64>,
    channels: &[ChannelSpec],
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let comps = model.components();
    let j = sample_index(rng, comps.iter().map(|c| c.weight));
    let c = &comps[j];
    for (d, o) in out.iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(rng);
        let v = (c.mean[d] + c.variance[d].sqrt() * z).clamp(-1.0, 1.0);
        // quantize so the written recording reads back identically
        *o = channels[d].scale_value(channels[d].unscale_value(v));
    }
}

/// Draws one recording per subject. Subject `s` (ids `01`, `02`, ...) uses
/// its own ChaCha stream, so subjects are independent of each other's length.
pub fn generate(spec: &SynthSpec) -> Result<Dataset<f64>> {
    spec.validate()?;
    let channels = synth_channels(spec.dim);
    let width = spec.n_subjects.to_string().len().max(2);
    let mut sequences = Vec::with_capacity(spec.n_subjects);
    for s in 0..spec.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(s as u64);
        let labels = sample_labels(spec, &mut rng);
        let mut frames = FrameMatrix::with_capacity(spec.dim, labels.len());
        let mut row = vec![0.0; spec.dim];
        for label in &labels {
            let model = spec
                .generators
                .get(*label)
                .expect("generator for every activity");
            sample_frame(model, &channels, &mut rng, &mut row);
            frames.push(&row)?;
        }
        sequences.push(LabeledSequence::new(
            format!("{:0width$}", s + 1),
            frames,
            labels,
            DEFAULT_SAMPLE_RATE_HZ,
        )?);
    }
    Dataset::new(sequences, channels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec::from_params(&SynthParams {
            frames_per_subject: 3000,
            min_segment: 50,
            ..SynthParams::default()
        })
        .unwrap()
    }

    #[test]
    fn deterministic() {
        let spec = small();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec {
            seed: 1,
            ..spec.clone()
        };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn fixed_chain_gives_single_activity() {
        let mut probs = vec![0.0; N_ACTIVITIES * N_ACTIVITIES];
        for i in 0..N_ACTIVITIES {
            probs[i * N_ACTIVITIES + i] = 1.0;
        }
        let spec = SynthSpec {
            activity_chain: TransitionMatrix::new(N_ACTIVITIES, probs).unwrap(),
            ..small()
        };
        for seq in generate(&spec).unwrap().sequences {
            assert!(seq.labels.iter().all(|l| *l == seq.labels[0]));
        }
    }

    #[test]
    fn runs_respect_min_segment() {
        let spec = small();
        for seq in generate(&spec).unwrap().sequences {
            assert_eq!(seq.len(), 3000);
            let mut run = 1;
            for t in 1..=seq.len() {
                if t < seq.len() && seq.labels[t] == seq.labels[t - 1] {
                    run += 1;
                } else {
                    assert!(run >= spec.min_segment, "run of {run}");
                    run = 1;
                }
            }
        }
    }

    #[test]
    fn generators_are_pairwise_separated() {
        let g = separated_generators(6, 0.6, 0.02).unwrap();
        for a in 0..N_ACTIVITIES {
            for b in (a + 1)..N_ACTIVITIES {
                let ma = &g.models()[a].components()[0].mean;
                let mb = &g.models()[b].components()[0].mean;
                let differing = ma.iter().zip(mb).filter(|(x, y)| x != y).count();
                assert!(differing >= 3, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn params_file() {
        let p = SynthParams::parse(
            "# demo\nn_subjects = 4\nsigma = 0.05\nchain = activities\n",
            "x",
        )
        .unwrap();
        assert_eq!(p.n_subjects, 4);
        assert_eq!(p.sigma, 0.05);
        assert_eq!(p.chain, ChainKind::Activities);
        assert_eq!(p.dim, 6);
        assert!(SynthParams::parse("colour = red\n", "x").is_err());
        assert!(SynthParams::parse("dim = six\n", "x").is_err());
    }

    #[test]
    fn values_stay_in_range() {
        let ds = generate(&small()).unwrap();
        assert!(ds.sequences[0]
            .frames
            .as_flat()
            .iter()
            .all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(ds.subjects(), vec!["01", "02", "03"]);
    }
}
