//! Input-space construction: channel selection and directional features
//! (lagged differences `s[t] - s[t - lag]` of selected channels).

use crate::data::{ChannelKind, ChannelSpec, Dataset, FrameMatrix, LabeledSequence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_DIRECTIONAL_LAG: usize = 15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionalConfig {
    pub lag: usize,
    /// Indices into the original (pre-selection) channel list.
    pub source_channels: Vec<usize>,
}

impl DirectionalConfig {
    pub fn new(lag: usize, source_channels: Vec<usize>) -> Self {
        Self {
            lag,
            source_channels,
        }
    }

    /// x- and z-axis accelerometers on the thighs, found by channel name
    /// (`acc_rt_x`, `acc_lt_z`, or any name containing `thigh`).
    pub fn thigh_default(channels: &[ChannelSpec], lag: usize) -> Result<Self> {
        Self::thigh_default_within(channels, None, lag)
    }

    fn thigh_default_within(
        channels: &[ChannelSpec],
        keep: Option<&[usize]>,
        lag: usize,
    ) -> Result<Self> {
        let sources: Vec<usize> = channels
            .iter()
            .enumerate()
            .filter(|(i, _)| keep.is_none_or(|k| k.contains(i)))
            .filter(|(_, c)| is_thigh_xz_accel(c))
            .map(|(i, _)| i)
            .collect();
        if sources.is_empty() {
            return Err(Error::InvalidConfig(
                "no thigh x/z accelerometer channels found for directional features".into(),
            ));
        }
        Ok(Self::new(lag, sources))
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        if self.lag == 0 {
            return Err(Error::InvalidConfig(
                "directional lag must be at least 1".into(),
            ));
        }
        if self.source_channels.is_empty() {
            return Err(Error::InvalidConfig(
                "directional features need at least one source channel".into(),
            ));
        }
        validate_indices(&self.source_channels, n_channels)
    }
}

fn is_thigh_xz_accel(c: &ChannelSpec) -> bool {
    let name = c.name.to_ascii_lowercase();
    let thigh = name.contains("_rt_") || name.contains("_lt_") || name.contains("thigh");
    let axis = name.ends_with('x') || name.ends_with('z');
    c.kind == ChannelKind::Accel && thigh && axis
}

fn validate_indices(indices: &[usize], n_channels: usize) -> Result<()> {
    for (pos, &i) in indices.iter().enumerate() {
        if i >= n_channels {
            return Err(Error::InvalidConfig(format!(
                "channel index {i} out of range for {n_channels} channels"
            )));
        }
        if indices[..pos].contains(&i) {
            return Err(Error::InvalidConfig(format!("duplicate channel index {i}")));
        }
    }
    Ok(())
}

fn select_frames<T: Scalar>(frames: &FrameMatrix<T>, keep: &[usize]) -> Result<FrameMatrix<T>> {
    if keep.is_empty() {
        return Err(Error::InvalidConfig("channel selection is empty".into()));
    }
    validate_indices(keep, frames.dim())?;
    let mut out = FrameMatrix::with_capacity(keep.len(), frames.len());
    let mut row = Vec::with_capacity(keep.len());
    for frame in frames.rows() {
        row.clear();
        row.extend(keep.iter().map(|&i| frame[i]));
        out.push(&row)?;
    }
    Ok(out)
}

fn augment_frames<T: Scalar>(
    frames: &FrameMatrix<T>,
    cfg: &DirectionalConfig,
) -> Result<FrameMatrix<T>> {
    cfg.validate(frames.dim())?;
    let out_dim = frames.dim() + cfg.source_channels.len();
    let mut out = FrameMatrix::with_capacity(out_dim, frames.len());
    let mut row = Vec::with_capacity(out_dim);
    for (t, frame) in frames.rows().enumerate() {
        row.clear();
        row.extend_from_slice(frame);
        if t < cfg.lag {
            row.extend(cfg.source_channels.iter().map(|_| T::zero()));
        } else {
            let past = frames.row(t - cfg.lag);
            row.extend(cfg.source_channels.iter().map(|&i| frame[i] - past[i]));
        }
        out.push(&row)?;
    }
    Ok(out)
}

fn with_frames<T: Scalar>(seq: &LabeledSequence<T>, frames: FrameMatrix<T>) -> LabeledSequence<T> {
    LabeledSequence {
        subject_id: seq.subject_id.clone(),
        frames,
        labels: seq.labels.clone(),
        sample_rate_hz: seq.sample_rate_hz,
    }
}

/// Keeps only `keep` channels, in the given order.
pub fn select_channels<T: Scalar>(
    seq: &LabeledSequence<T>,
    keep: &[usize],
) -> Result<LabeledSequence<T>> {
    Ok(with_frames(seq, select_frames(&seq.frames, keep)?))
}

/// Appends `d_i[t] = s_i[t] - s_i[t - lag]` for each source channel, zero
/// while `t < lag`. Source indices refer to `seq`'s channels.
pub fn augment_directional<T: Scalar>(
    seq: &LabeledSequence<T>,
    cfg: &DirectionalConfig,
) -> Result<LabeledSequence<T>> {
    Ok(with_frames(seq, augment_frames(&seq.frames, cfg)?))
}

/// Channel selection followed by optional directional augmentation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureConfig {
    /// `None` keeps every channel.
    pub keep_channels: Option<Vec<usize>>,
    pub directional: Option<DirectionalConfig>,
}

impl FeatureConfig {
    /// Directional features on the default thigh channels among those kept.
    pub fn with_default_directional(
        channels: &[ChannelSpec],
        keep_channels: Option<Vec<usize>>,
        lag: usize,
    ) -> Result<Self> {
        let directional =
            DirectionalConfig::thigh_default_within(channels, keep_channels.as_deref(), lag)?;
        Ok(Self {
            keep_channels,
            directional: Some(directional),
        })
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        if let Some(keep) = &self.keep_channels {
            if keep.is_empty() {
                return Err(Error::InvalidConfig("channel selection is empty".into()));
            }
            validate_indices(keep, n_channels)?;
        }
        if let Some(d) = &self.directional {
            d.validate(n_channels)?;
            if let Some(keep) = &self.keep_channels {
                if let Some(missing) = d.source_channels.iter().find(|i| !keep.contains(i)) {
                    return Err(Error::InvalidConfig(format!(
                        "directional source channel {missing} is not among the kept channels"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn output_dim(&self, n_channels: usize) -> usize {
        let kept = self.keep_channels.as_ref().map_or(n_channels, |k| k.len());
        kept + self
            .directional
            .as_ref()
            .map_or(0, |d| d.source_channels.len())
    }

    /// Directional config re-indexed into the selected channel space.
    fn local_directional(&self) -> Option<DirectionalConfig> {
        let d = self.directional.as_ref()?;
        let sources = match &self.keep_channels {
            None => d.source_channels.clone(),
            Some(keep) => d
                .source_channels
                .iter()
                .map(|i| keep.iter().position(|k| k == i).expect("validated subset"))
                .collect(),
        };
        Some(DirectionalConfig::new(d.lag, sources))
    }

    pub fn apply<T: Scalar>(&self, seq: &LabeledSequence<T>) -> Result<LabeledSequence<T>> {
        Ok(with_frames(seq, self.apply_frames(&seq.frames)?))
    }

    /// [`FeatureConfig::apply`] on unlabeled frames.
    pub fn apply_frames<T: Scalar>(&self, frames: &FrameMatrix<T>) -> Result<FrameMatrix<T>> {
        self.validate(frames.dim())?;
        let selected = match &self.keep_channels {
            Some(keep) => select_frames(frames, keep)?,
            None => frames.clone(),
        };
        match self.local_directional() {
            Some(d) => augment_frames(&selected, &d),
            None => Ok(selected),
        }
    }

    pub fn apply_dataset<T: Scalar>(&self, dataset: &Dataset<T>) -> Result<Dataset<T>> {
        self.validate(dataset.channels.len())?;
        let mut channels: Vec<ChannelSpec> = match &self.keep_channels {
            Some(keep) => keep.iter().map(|&i| dataset.channels[i].clone()).collect(),
            None => dataset.channels.clone(),
        };
        if let Some(d) = &self.directional {
            channels.extend(d.source_channels.iter().map(|&i| {
                let src = &dataset.channels[i];
                ChannelSpec::new(format!("d_{}", src.name), src.kind)
            }));
        }
        let sequences = dataset
            .sequences
            .iter()
            .map(|s| self.apply(s))
            .collect::<Result<_>>()?;
        Dataset::new(sequences, channels)
    }

    /// Causal frame-by-frame transformer equivalent to [`FeatureConfig::apply`].
    pub fn stream<T: Scalar>(&self, n_channels: usize) -> Result<FeatureStream<T>> {
        self.validate(n_channels)?;
        let directional = self.local_directional();
        let history_len = directional
            .as_ref()
            .map_or(0, |d| d.lag * d.source_channels.len());
        Ok(FeatureStream {
            keep: self.keep_channels.clone(),
            n_channels,
            directional,
            history: vec![T::zero(); history_len],
            filled: 0,
            slot: 0,
            selected: Vec::with_capacity(n_channels),
        })
    }
}

/// Streaming counterpart of [`FeatureConfig::apply`]; keeps the last `lag`
/// source values in a ring.
#[derive(Clone, Debug)]
pub struct FeatureStream<T> {
    keep: Option<Vec<usize>>,
    n_channels: usize,
    directional: Option<DirectionalConfig>,
    history: Vec<T>,
    filled: usize,
    slot: usize,
    selected: Vec<T>,
}

impl<T: Scalar> FeatureStream<T> {
    /// Transforms one raw frame into `out` (cleared first).
    pub fn push(&mut self, raw: &[T], out: &mut Vec<T>) -> Result<()> {
        if raw.len() != self.n_channels {
            return Err(Error::DimensionMismatch {
                expected: self.n_channels,
                actual: raw.len(),
            });
        }
        self.selected.clear();
        match &self.keep {
            Some(keep) => self.selected.extend(keep.iter().map(|&i| raw[i])),
            None => self.selected.extend_from_slice(raw),
        }
        out.clear();
        out.extend_from_slice(&self.selected);
        let Some(d) = &self.directional else {
            return Ok(());
        };
        // ring slot `t % lag` holds the source values from `t - lag`
        let n_src = d.source_channels.len();
        let base = self.slot * n_src;
        let warm = self.filled == d.lag;
        for (j, &i) in d.source_channels.iter().enumerate() {
            let current = self.selected[i];
            let past = std::mem::replace(&mut self.history[base + j], current);
            out.push(if warm { current - past } else { T::zero() });
        }
        if !warm {
            self.filled += 1;
        }
        self.slot = (self.slot + 1) % d.lag;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.filled = 0;
        self.slot = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ActivityLabel, ChannelKind};

    fn seq_from(rows: &[Vec<f64>]) -> LabeledSequence<f64> {
        let dim = rows[0].len();
        LabeledSequence::new(
            "s",
            FrameMatrix::from_rows(dim, rows).unwrap(),
            vec![ActivityLabel::Walking; rows.len()],
            56.35,
        )
        .unwrap()
    }

    fn hugadb_channels() -> Vec<ChannelSpec> {
        let mut names = Vec::new();
        for sensor in ["acc", "gyro"] {
            for place in ["rf", "rs", "rt", "lf", "ls", "lt"] {
                for axis in ["x", "y", "z"] {
                    names.push(format!("{sensor}_{place}_{axis}"));
                }
            }
        }
        names.push("EMG_r".into());
        names.push("EMG_l".into());
        names
            .iter()
            .map(|n| ChannelSpec::infer(n).unwrap())
            .collect()
    }

    #[test]
    fn select_all_is_identity() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|t| (0..38).map(|c| (t * c) as f64 * 1e-3).collect())
            .collect();
        let seq = seq_from(&rows);
        let all: Vec<usize> = (0..38).collect();
        assert_eq!(select_channels(&seq, &all).unwrap(), seq);
    }

    #[test]
    fn thigh_and_shin_accel_selection_has_twelve_channels() {
        let channels = hugadb_channels();
        let keep: Vec<usize> = channels
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                c.kind == ChannelKind::Accel
                    && ["_rt_", "_lt_", "_rs_", "_ls_"]
                        .iter()
                        .any(|p| c.name.contains(p))
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(keep.len(), 12);
        let seq = seq_from(&[vec![0.0; 38], vec![0.5; 38]]);
        assert_eq!(select_channels(&seq, &keep).unwrap().dim(), 12);
    }

    #[test]
    fn empty_or_bad_selection_rejected() {
        let seq = seq_from(&[vec![0.0; 3]]);
        assert!(select_channels(&seq, &[]).is_err());
        assert!(select_channels(&seq, &[3]).is_err());
        assert!(select_channels(&seq, &[1, 1]).is_err());
    }

    #[test]
    fn constant_signal_has_zero_direction() {
        let seq = seq_from(&vec![vec![0.3, -0.2]; 40]);
        let out = augment_directional(&seq, &DirectionalConfig::new(15, vec![0, 1])).unwrap();
        for row in out.frames.rows() {
            assert_eq!(&row[2..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn ramp_gives_lag_times_slope() {
        let h = 0.01;
        let rows: Vec<Vec<f64>> = (0..50).map(|t| vec![t as f64 * h]).collect();
        let out =
            augment_directional(&seq_from(&rows), &DirectionalConfig::new(15, vec![0])).unwrap();
        for (t, row) in out.frames.rows().enumerate() {
            assert_eq!(row[0], t as f64 * h);
            if t < 15 {
                assert_eq!(row[1], 0.0);
            } else {
                assert!((row[1] - 15.0 * h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_thigh_sources_give_42_features() {
        let channels = hugadb_channels();
        let d = DirectionalConfig::thigh_default(&channels, 15).unwrap();
        let names: Vec<&str> = d
            .source_channels
            .iter()
            .map(|&i| channels[i].name.as_str())
            .collect();
        assert_eq!(names, vec!["acc_rt_x", "acc_rt_z", "acc_lt_x", "acc_lt_z"]);
        let cfg = FeatureConfig {
            keep_channels: None,
            directional: Some(d),
        };
        assert_eq!(cfg.output_dim(38), 42);
        let seq = seq_from(&vec![vec![0.1; 38]; 20]);
        assert_eq!(cfg.apply(&seq).unwrap().dim(), 42);
    }

    #[test]
    fn thigh_only_configuration_defaults() {
        let channels = hugadb_channels();
        let keep: Vec<usize> = channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.name.starts_with("acc_rt") || c.name.starts_with("acc_lt"))
            .map(|(i, _)| i)
            .collect();
        let cfg = FeatureConfig::with_default_directional(&channels, Some(keep), 15).unwrap();
        assert_eq!(cfg.output_dim(38), 10);
    }

    #[test]
    fn directional_source_must_be_kept() {
        let cfg = FeatureConfig {
            keep_channels: Some(vec![0, 1]),
            directional: Some(DirectionalConfig::new(3, vec![2])),
        };
        assert!(cfg.validate(4).is_err());
        let zero_lag = DirectionalConfig::new(0, vec![0]);
        assert!(zero_lag.validate(4).is_err());
    }

    #[test]
    fn stream_matches_batch() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|t| {
                (0..5)
                    .map(|c| ((t * 7 + c * 3) % 11) as f64 / 11.0 - 0.5)
                    .collect()
            })
            .collect();
        let seq = seq_from(&rows);
        let cfg = FeatureConfig {
            keep_channels: Some(vec![4, 0, 2]),
            directional: Some(DirectionalConfig::new(4, vec![2, 4])),
        };
        let batch = cfg.apply(&seq).unwrap();
        let mut stream = cfg.stream::<f64>(5).unwrap();
        let mut out = Vec::new();
        for (t, raw) in seq.frames.rows().enumerate() {
            stream.push(raw, &mut out).unwrap();
            assert_eq!(out.as_slice(), batch.frames.row(t), "frame {t}");
        }
    }
}
