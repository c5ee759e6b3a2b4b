//! Labeled sensor recordings: activity labels, channel layouts, frame storage
//! and leave-one-subject-out splitting.

mod recording;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub use recording::{
    load_dir, parse_recording, read_recording, write_dir, write_recording, RecordingReader,
    DEFAULT_SAMPLE_RATE_HZ,
};

/// Number of activity classes.
pub const N_ACTIVITIES: usize = 8;

/// The eight recognized activities. Discriminants are the label ids used in
/// recording files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ActivityLabel {
    Walking = 1,
    Running = 2,
    GoingUp = 3,
    GoingDown = 4,
    Sitting = 5,
    SittingDown = 6,
    StandingUp = 7,
    Standing = 8,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; N_ACTIVITIES] = [
        ActivityLabel::Walking,
        ActivityLabel::Running,
        ActivityLabel::GoingUp,
        ActivityLabel::GoingDown,
        ActivityLabel::Sitting,
        ActivityLabel::SittingDown,
        ActivityLabel::StandingUp,
        ActivityLabel::Standing,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Zero-based position in [`ActivityLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1..=8 => Some(Self::ALL[id as usize - 1]),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivityLabel::Walking => "walking",
            ActivityLabel::Running => "running",
            ActivityLabel::GoingUp => "going_up",
            ActivityLabel::GoingDown => "going_down",
            ActivityLabel::Sitting => "sitting",
            ActivityLabel::SittingDown => "sitting_down",
            ActivityLabel::StandingUp => "standing_up",
            ActivityLabel::Standing => "standing",
        }
    }

    /// Human-readable title used in report headers.
    pub fn title(self) -> &'static str {
        match self {
            ActivityLabel::Walking => "Walking",
            ActivityLabel::Running => "Running",
            ActivityLabel::GoingUp => "Going up",
            ActivityLabel::GoingDown => "Going down",
            ActivityLabel::Sitting => "Sitting",
            ActivityLabel::SittingDown => "Sitting down",
            ActivityLabel::StandingUp => "Standing up",
            ActivityLabel::Standing => "Standing",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == name)
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Accel,
    Gyro,
    Emg,
}

impl ChannelKind {
    /// Raw integer range of the on-disk encoding: int16 for inertial
    /// channels, uint8 for EMG.
    pub fn default_raw_range(self) -> (i32, i32) {
        match self {
            ChannelKind::Accel | ChannelKind::Gyro => (i16::MIN as i32, i16::MAX as i32),
            ChannelKind::Emg => (0, u8::MAX as i32),
        }
    }
}

/// One sensor column: its name, kind and raw integer range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSpec {
    pub name: String,
    pub kind: ChannelKind,
    raw_min: i32,
    raw_max: i32,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, kind: ChannelKind) -> Self {
        let (raw_min, raw_max) = kind.default_raw_range();
        Self {
            name: name.into(),
            kind,
            raw_min,
            raw_max,
        }
    }

    pub fn with_range(
        name: impl Into<String>,
        kind: ChannelKind,
        raw_min: i32,
        raw_max: i32,
    ) -> Result<Self> {
        let name = name.into();
        if raw_min >= raw_max {
            return Err(Error::InvalidConfig(format!(
                "channel `{name}` has degenerate raw range [{raw_min}, {raw_max}]"
            )));
        }
        Ok(Self {
            name,
            kind,
            raw_min,
            raw_max,
        })
    }

    /// Infers the channel kind from a column name prefix (`acc`, `gyro`,
    /// `emg`, case-insensitive).
    pub fn infer(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        let kind = if lower.starts_with("acc") {
            ChannelKind::Accel
        } else if lower.starts_with("gyr") {
            ChannelKind::Gyro
        } else if lower.starts_with("emg") {
            ChannelKind::Emg
        } else {
            return None;
        };
        Some(Self::new(name, kind))
    }

    pub fn raw_range(&self) -> (i32, i32) {
        (self.raw_min, self.raw_max)
    }

    pub fn contains_raw(&self, raw: i64) -> bool {
        raw >= self.raw_min as i64 && raw <= self.raw_max as i64
    }

    /// Affine map of the raw range onto `[-1, 1]`.
    pub fn scale_value<T: Scalar>(&self, raw: i32) -> T {
        let span = self.raw_max as f64 - self.raw_min as f64;
        let v = 2.0 * (raw as f64 - self.raw_min as f64) / span - 1.0;
        lit(v)
    }

    /// Inverse of [`ChannelSpec::scale_value`], rounded and clamped to the
    /// raw range.
    pub fn unscale_value<T: Scalar>(&self, value: T) -> i32 {
        let v = value.to_f64().unwrap_or(0.0);
        let span = self.raw_max as f64 - self.raw_min as f64;
        let raw = ((v + 1.0) * 0.5 * span + self.raw_min as f64).round();
        raw.clamp(self.raw_min as f64, self.raw_max as f64) as i32
    }
}

/// Row-major matrix of frames; row `t` is the observation at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> FrameMatrix<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "frame dimension must be positive".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut m = Self::new(dim);
        for r in rows {
            m.push(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, frame: &[T]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: frame.len(),
            });
        }
        self.data.extend_from_slice(frame);
        Ok(())
    }

    /// Appends all rows of `other`.
    pub fn extend(&mut self, other: Frames<'_, T>) -> Result<()> {
        if other.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim(),
            });
        }
        self.data.extend_from_slice(other.as_flat());
        Ok(())
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn view(&self) -> Frames<'_, T> {
        Frames {
            dim: self.dim,
            data: &self.data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> FrameMatrix<U> {
        FrameMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).unwrap_or_else(U::nan))
                .collect(),
        }
    }
}

/// Borrowed view over a contiguous block of frames.
#[derive(Clone, Copy, Debug)]
pub struct Frames<'a, T> {
    dim: usize,
    data: &'a [T],
}

impl<'a, T: Scalar> Frames<'a, T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &'a [T] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'a, T> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn slice(&self, range: Range<usize>) -> Frames<'a, T> {
        Frames {
            dim: self.dim,
            data: &self.data[range.start * self.dim..range.end * self.dim],
        }
    }

    pub fn as_flat(&self) -> &'a [T] {
        self.data
    }
}

/// A continuous recording: one label per frame, one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence<T> {
    pub subject_id: String,
    pub frames: FrameMatrix<T>,
    pub labels: Vec<ActivityLabel>,
    pub sample_rate_hz: f64,
}

impl<T: Scalar> LabeledSequence<T> {
    pub fn new(
        subject_id: impl Into<String>,
        frames: FrameMatrix<T>,
        labels: Vec<ActivityLabel>,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if frames.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: frames.len(),
                right: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::InsufficientData("sequence has no frames".into()));
        }
        if let Some(pos) = frames.as_flat().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "frame {} channel {}",
                pos / frames.dim(),
                pos % frames.dim()
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            frames,
            labels,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames.dim()
    }

    pub fn cast<U: Scalar>(&self) -> LabeledSequence<U> {
        LabeledSequence {
            subject_id: self.subject_id.clone(),
            frames: self.frames.cast(),
            labels: self.labels.clone(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// A set of recordings sharing one channel layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub sequences: Vec<LabeledSequence<T>>,
    pub channels: Vec<ChannelSpec>,
}

/// Result of [`Dataset::split_loso`].
#[derive(Clone, Debug)]
pub struct LosoSplit<T> {
    pub train: Dataset<T>,
    pub validation: Dataset<T>,
    pub test: Dataset<T>,
    pub validation_subject: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(sequences: Vec<LabeledSequence<T>>, channels: Vec<ChannelSpec>) -> Result<Self> {
        if let Some(seq) = sequences.iter().find(|s| s.dim() != channels.len()) {
            return Err(Error::DimensionMismatch {
                expected: channels.len(),
                actual: seq.dim(),
            });
        }
        Ok(Self {
            sequences,
            channels,
        })
    }

    /// Distinct subject ids in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        self.sequences
            .iter()
            .map(|s| s.subject_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn n_frames(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    fn filter(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            sequences: self
                .sequences
                .iter()
                .filter(|s| keep(&s.subject_id))
                .cloned()
                .collect(),
            channels: self.channels.clone(),
        }
    }

    /// Test = `test_subject`, validation = its cyclic successor in sorted
    /// subject order, train = everything else.
    pub fn split_loso(&self, test_subject: &str) -> Result<LosoSplit<T>> {
        let subjects = self.subjects();
        if subjects.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "leave-one-subject-out needs at least 3 subjects, found {}",
                subjects.len()
            )));
        }
        let pos = subjects
            .iter()
            .position(|s| s == test_subject)
            .ok_or_else(|| Error::UnknownSubject(test_subject.to_string()))?;
        let validation_subject = subjects[(pos + 1) % subjects.len()].clone();
        Ok(LosoSplit {
            train: self.filter(|s| s != test_subject && s != validation_subject),
            validation: self.filter(|s| s == validation_subject),
            test: self.filter(|s| s == test_subject),
            validation_subject,
        })
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            sequences: self.sequences.iter().map(|s| s.cast()).collect(),
            channels: self.channels.clone(),
        }
    }
}
