//! Text recording format.
//!
//! ```text
//! #subject 07
//! #rate 56.35
//! acc_rf_x<TAB>acc_rf_y<TAB>...<TAB>act
//! -1203<TAB>15872<TAB>...<TAB>1
//! ```
//!
//! `#` lines carry metadata; the first other line is the tab-separated
//! header whose last column is `act`. Data rows hold raw integers and a label
//! id in `1..=8`. When `#subject` is absent the file stem is used.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ActivityLabel, ChannelSpec, Dataset, FrameMatrix, LabeledSequence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nominal sensor sampling rate.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 56.35;

const LABEL_COLUMN: &str = "act";

/// Incremental reader over one recording; yields frames one at a time so that
/// standard input can be consumed as a stream.
pub struct RecordingReader<R> {
    lines: std::io::Lines<R>,
    source_name: String,
    line_no: usize,
    pub subject_id: String,
    pub sample_rate_hz: f64,
    pub channels: Vec<ChannelSpec>,
    pub has_labels: bool,
}

impl<R: BufRead> RecordingReader<R> {
    /// Reads metadata and the header line. With `channels = None` the layout
    /// is inferred from column names; otherwise the header must match it.
    /// `require_labels` demands a trailing `act` column.
    pub fn new(
        reader: R,
        source_name: &str,
        channels: Option<&[ChannelSpec]>,
        require_labels: bool,
    ) -> Result<Self> {
        let mut lines = reader.lines();
        let mut line_no = 0;
        let mut subject_id = None;
        let mut sample_rate_hz = DEFAULT_SAMPLE_RATE_HZ;
        let header = loop {
            line_no += 1;
            let line = match lines.next() {
                Some(l) => l.map_err(|e| Error::io(source_name, e))?,
                None => return Err(Error::parse(source_name, line_no, "missing header line")),
            };
            let line = line.trim_end_matches('\r');
            if let Some(meta) = line.strip_prefix('#') {
                let mut parts = meta.trim().splitn(2, char::is_whitespace);
                match (parts.next(), parts.next().map(str::trim)) {
                    (Some("subject"), Some(id)) if !id.is_empty() => {
                        subject_id = Some(id.to_string())
                    }
                    (Some("rate"), Some(hz)) => {
                        sample_rate_hz = hz
                            .parse::<f64>()
                            .ok()
                            .filter(|r| r.is_finite() && *r > 0.0)
                            .ok_or_else(|| {
                                Error::parse(source_name, line_no, format!("bad rate `{hz}`"))
                            })?;
                    }
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            break line.to_string();
        };

        let mut names: Vec<&str> = header.split('\t').collect();
        let has_labels = names.last() == Some(&LABEL_COLUMN);
        if has_labels {
            names.pop();
        } else if require_labels {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("malformed header: last column must be `{LABEL_COLUMN}`"),
            ));
        }
        if names.is_empty() || names.iter().any(|n| n.is_empty()) {
            return Err(Error::parse(
                source_name,
                line_no,
                "malformed header: empty column name",
            ));
        }
        let channels = match channels {
            Some(expected) => {
                let matches = expected.len() == names.len()
                    && expected.iter().zip(&names).all(|(c, n)| c.name == *n);
                if !matches {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        "malformed header: columns do not match the channel layout",
                    ));
                }
                expected.to_vec()
            }
            None => names
                .iter()
                .map(|n| {
                    ChannelSpec::infer(n).ok_or_else(|| {
                        Error::parse(
                            source_name,
                            line_no,
                            format!("malformed header: unknown channel kind for `{n}`"),
                        )
                    })
                })
                .collect::<Result<_>>()?,
        };

        let subject_id = subject_id.unwrap_or_else(|| {
            Path::new(source_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| source_name.to_string())
        });

        Ok(Self {
            lines,
            source_name: source_name.to_string(),
            line_no,
            subject_id,
            sample_rate_hz,
            channels,
            has_labels,
        })
    }

    /// Parses the next data row into `out` (cleared first). Returns
    /// `Ok(None)` at end of input, otherwise the row's label when the
    /// recording has one.
    pub fn next_frame<T: Scalar>(
        &mut self,
        out: &mut Vec<T>,
    ) -> Result<Option<Option<ActivityLabel>>> {
        let line = loop {
            self.line_no += 1;
            match self.lines.next() {
                None => return Ok(None),
                Some(l) => {
                    let l = l.map_err(|e| Error::io(&self.source_name, e))?;
                    let trimmed = l.trim_end_matches('\r');
                    if trimmed.is_empty() || trimmed.starts_with('#') {
                        continue;
                    }
                    break trimmed.to_string();
                }
            }
        };
        let expected = self.channels.len() + usize::from(self.has_labels);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected {
            return Err(self.err(format!(
                "row width mismatch: expected {expected} columns, found {}",
                fields.len()
            )));
        }
        out.clear();
        for (field, channel) in fields.iter().zip(&self.channels) {
            let raw: i64 = field
                .trim()
                .parse()
                .map_err(|_| self.err(format!("`{field}` is not an integer")))?;
            if !channel.contains_raw(raw) {
                let (lo, hi) = channel.raw_range();
                return Err(self.err(format!(
                    "value {raw} outside raw range [{lo}, {hi}] of channel `{}`",
                    channel.name
                )));
            }
            out.push(channel.scale_value(raw as i32));
        }
        if !self.has_labels {
            return Ok(Some(None));
        }
        let act = fields[fields.len() - 1].trim();
        let label = act
            .parse::<u8>()
            .ok()
            .and_then(ActivityLabel::from_id)
            .ok_or_else(|| self.err(format!("unknown label id `{act}`")))?;
        Ok(Some(Some(label)))
    }

    fn err(&self, message: String) -> Error {
        Error::parse(&self.source_name, self.line_no, message)
    }

    /// Consumes the remaining rows into a labeled sequence.
    pub fn into_sequence<T: Scalar>(mut self) -> Result<LabeledSequence<T>> {
        let mut frames = FrameMatrix::new(self.channels.len());
        let mut labels = Vec::new();
        let mut row = Vec::with_capacity(self.channels.len());
        while let Some(label) = self.next_frame::<T>(&mut row)? {
            let label = label.ok_or_else(|| self.err("recording has no label column".into()))?;
            frames.push(&row)?;
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(self.err("recording contains no data rows".into()));
        }
        LabeledSequence::new(self.subject_id, frames, labels, self.sample_rate_hz)
    }
}

/// Reads a labeled recording from any buffered reader. `channels = None`
/// infers the layout from the header.
pub fn read_recording<T: Scalar, R: BufRead>(
    reader: R,
    source_name: &str,
    channels: Option<&[ChannelSpec]>,
) -> Result<(LabeledSequence<T>, Vec<ChannelSpec>)> {
    let reader = RecordingReader::new(reader, source_name, channels, true)?;
    let channels = reader.channels.clone();
    Ok((reader.into_sequence()?, channels))
}

pub fn parse_recording<T: Scalar>(
    path: &Path,
    channels: &[ChannelSpec],
) -> Result<LabeledSequence<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_recording(
        BufReader::new(file),
        &path.to_string_lossy(),
        Some(channels),
    )
    .map(|(s, _)| s)
}

pub fn write_recording<T: Scalar, W: Write>(
    seq: &LabeledSequence<T>,
    channels: &[ChannelSpec],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "#subject {}", seq.subject_id)?;
    writeln!(out, "#rate {}", seq.sample_rate_hz)?;
    let header: Vec<&str> = channels.iter().map(|c| c.name.as_str()).collect();
    writeln!(out, "{}\t{LABEL_COLUMN}", header.join("\t"))?;
    let mut line = String::new();
    for (frame, label) in seq.frames.rows().zip(&seq.labels) {
        line.clear();
        for (v, c) in frame.iter().zip(channels) {
            line.push_str(&c.unscale_value(*v).to_string());
            line.push('\t');
        }
        line.push_str(&label.id().to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn is_recording_file(path: &Path) -> bool {
    let hidden = path
        .file_name()
        .and_then(|n| n.to_str())
        .is_none_or(|n| n.starts_with('.'));
    let ext = path.extension().and_then(|e| e.to_str());
    path.is_file() && !hidden && matches!(ext, Some("txt") | Some("tsv"))
}

/// Loads every `.txt`/`.tsv` recording in `dir` (sorted by file name). The
/// channel layout comes from the first file; all others must match it.
pub fn load_dir<T: Scalar>(dir: &Path) -> Result<Dataset<T>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_recording_file(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no recordings (*.txt, *.tsv) in {}",
            dir.display()
        )));
    }
    let mut channels: Option<Vec<ChannelSpec>> = None;
    let mut sequences = Vec::with_capacity(paths.len());
    for path in &paths {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (seq, found) = read_recording(
            BufReader::new(file),
            &path.to_string_lossy(),
            channels.as_deref(),
        )?;
        channels.get_or_insert(found);
        sequences.push(seq);
    }
    Dataset::new(sequences, channels.unwrap_or_default())
}

/// Writes one recording file per sequence into `dir` (created if missing).
pub fn write_dir<T: Scalar>(dataset: &Dataset<T>, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(dataset.sequences.len());
    for (i, seq) in dataset.sequences.iter().enumerate() {
        let same_subject = dataset.sequences[..i]
            .iter()
            .filter(|s| s.subject_id == seq.subject_id)
            .count();
        let name = if same_subject == 0 {
            format!("subject_{}.txt", seq.subject_id)
        } else {
            format!("subject_{}_{}.txt", seq.subject_id, same_subject)
        };
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write_recording(seq, &dataset.channels, &mut w).map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
