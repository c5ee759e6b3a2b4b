//! `RAPIDHARE-MODEL v1` text format. Reals are written with 17 significant
//! digits so `f64` values round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ActivityModelSet, Component, GmmModel};
use crate::data::ActivityLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_HEADER: &str = "RAPIDHARE-MODEL v1";

fn fmt_real<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64().unwrap_or(f64::NAN))
}

fn join_reals<T: Scalar>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| fmt_real(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_model<T: Scalar, W: Write>(
    models: &ActivityModelSet<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{MODEL_HEADER}")?;
    writeln!(out, "dim {}", models.dim())?;
    writeln!(out, "activities {}", models.len())?;
    for (label, model) in models.iter() {
        writeln!(
            out,
            "activity {} components {}",
            label.name(),
            model.n_components()
        )?;
        for c in model.components() {
            writeln!(out, "component {}", fmt_real(c.weight))?;
            writeln!(out, "mean {}", join_reals(&c.mean))?;
            writeln!(out, "var {}", join_reals(&c.variance))?;
        }
    }
    Ok(())
}

pub fn write_model_file<T: Scalar>(models: &ActivityModelSet<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(models, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    source: String,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line_no += 1;
            match self.inner.next() {
                None => return Err(self.err("unexpected end of model file")),
                Some(l) => {
                    let l = l.map_err(|e| Error::io(&self.source, e))?;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok(l.to_string());
                    }
                }
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(&self.source, self.line_no, message)
    }

    /// Reads `<keyword> <rest>` and returns the whitespace-split rest.
    fn keyword(&mut self, keyword: &str) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}` line")));
        }
        Ok(parts.map(str::to_string).collect())
    }

    fn count(&mut self, keyword: &str) -> Result<usize> {
        let parts = self.keyword(keyword)?;
        match parts.as_slice() {
            [n] => n
                .parse()
                .map_err(|_| self.err(format!("bad {keyword} count `{n}`"))),
            _ => Err(self.err(format!("`{keyword}` takes one integer"))),
        }
    }

    fn reals<T: Scalar>(&mut self, keyword: &str, expected: usize) -> Result<Vec<T>> {
        let parts = self.keyword(keyword)?;
        if parts.len() != expected {
            return Err(self.err(format!(
                "`{keyword}` has {} values, expected {expected}",
                parts.len()
            )));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .and_then(T::from_f64)
                    .ok_or_else(|| self.err(format!("bad real `{p}`")))
            })
            .collect()
    }
}

pub fn read_model<T: Scalar, R: BufRead>(reader: R, source: &str) -> Result<ActivityModelSet<T>> {
    let mut lines = Lines {
        inner: reader.lines(),
        source: source.to_string(),
        line_no: 0,
    };
    if lines.next_line()? != MODEL_HEADER {
        return Err(lines.err(format!("missing `{MODEL_HEADER}` header")));
    }
    let dim = lines.count("dim")?;
    let n = lines.count("activities")?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let parts = lines.keyword("activity")?;
        let (label, k) = match parts.as_slice() {
            [name, kw, k] if kw == "components" => {
                let label = ActivityLabel::from_name(name)
                    .ok_or_else(|| lines.err(format!("unknown activity `{name}`")))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| lines.err(format!("bad component count `{k}`")))?;
                (label, k)
            }
            _ => return Err(lines.err("expected `activity <name> components <k>`")),
        };
        let mut components = Vec::with_capacity(k);
        for _ in 0..k {
            let weight = lines.reals::<T>("component", 1)?[0];
            let mean = lines.reals("mean", dim)?;
            let variance = lines.reals("var", dim)?;
            components.push(Component {
                weight,
                mean,
                variance,
            });
        }
        let model = GmmModel::new(components).map_err(|e| lines.err(format!("{label}: {e}")))?;
        entries.push((label, model));
    }
    ActivityModelSet::new(entries)
}

pub fn read_model_file<T: Scalar>(path: &Path) -> Result<ActivityModelSet<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file), &path.to_string_lossy())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> ActivityModelSet<f64> {
        let m = |w: f64, mu: f64| {
            GmmModel::new(vec![
                Component {
                    weight: w,
                    mean: vec![mu, 0.1 / 3.0],
                    variance: vec![0.7, 1e-6],
                },
                Component {
                    weight: 1.0 - w,
                    mean: vec![-mu, std::f64::consts::PI],
                    variance: vec![0.3, 2.5],
                },
            ])
            .unwrap()
        };
        ActivityModelSet::new(vec![
            (ActivityLabel::Standing, m(0.125, 0.2)),
            (ActivityLabel::Walking, m(1.0 / 3.0, -0.7)),
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = sample_set();
        let mut buf = Vec::new();
        write_model(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "RAPIDHARE-MODEL v1\ndim 2\nactivities 2\nactivity walking components 2\n"
        ));
        let back: ActivityModelSet<f64> = read_model(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn truncated_file_reports_line() {
        let mut buf = Vec::new();
        write_model(&sample_set(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        let err = read_model::<f64, _>(cut.as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_model::<f64, _>("RAPIDHARE-MODEL v2\n".as_bytes(), "mem").is_err());
    }
}
