use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::sync::Arc;

use rapidhare::bench::{bench_hmm, bench_rapidhare, random_frames, BenchStats};
use rapidhare::data::{load_dir, write_dir, RecordingReader};
use rapidhare::eval::{format_report, EvalReport};
use rapidhare::gmm::{read_model_file, write_model_file};
use rapidhare::predictor::{naive_window_scores, posterior};
use rapidhare::{
    train_activity_models, ActivityModelSet, CvConfig, FrameMatrix, HmmConfig, Method,
    PredictorConfig, PredictorSession, SynthParams, SynthSpec, TransitionMatrix,
};

use crate::options::{component_counts, em_config, feature_config};
use crate::{Cli, CliError, Command, Format};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Train {
            data_dir,
            output,
            em,
            features,
        } => {
            let dataset = load_dir::<f64>(&data_dir)?;
            let feats = feature_config(&features, &dataset.channels)?;
            let counts = component_counts(&em)?;
            let em_cfg = em_config(&em, seed)?;
            let train = feats.apply_dataset(&dataset)?;
            let (models, summary) = train_activity_models(&train, &counts, &em_cfg)?;
            write_model_file(&models, &output)?;
            let rows: Vec<Vec<String>> = summary
                .iter()
                .map(|s| {
                    vec![
                        s.label.name().to_string(),
                        s.n_frames.to_string(),
                        s.components.to_string(),
                        s.iterations.to_string(),
                        s.converged.to_string(),
                        format!("{:.6}", s.final_loglik),
                    ]
                })
                .collect();
            write_table(
                &mut out,
                cli.format,
                &[
                    "activity",
                    "frames",
                    "components",
                    "iterations",
                    "converged",
                    "final_loglik",
                ],
                &rows,
            )?;
        }
        Command::Predict {
            model,
            input,
            window,
            oracle,
            features,
        } => {
            let models = Arc::new(read_model_file::<f64>(&model)?);
            let cfg = PredictorConfig::with_window(window);
            if input.as_os_str() == "-" {
                let stdin = io::stdin();
                let live = stdin.lock();
                predict(
                    live, "<stdin>", &models, cfg, &features, oracle, true, &mut out,
                )?;
            } else {
                let file = File::open(&input).map_err(|e| rapidhare::Error::Io {
                    path: input.clone(),
                    source: e,
                })?;
                let name = input.to_string_lossy();
                predict(
                    BufReader::new(file),
                    &name,
                    &models,
                    cfg,
                    &features,
                    oracle,
                    false,
                    &mut out,
                )?;
            }
        }
        Command::Evaluate {
            data_dir,
            tolerance,
            window,
            method,
            hmm_window,
            transitions,
            jobs,
            folds,
            em,
            features,
        } => {
            let dataset = load_dir::<f64>(&data_dir)?;
            let cfg = CvConfig {
                counts: component_counts(&em)?,
                em: em_config(&em, seed)?,
                features: feature_config(&features, &dataset.channels)?,
                predictor: PredictorConfig::with_window(window),
                tolerance,
                method: method.into(),
                hmm: HmmConfig::uniform(rapidhare::N_ACTIVITIES, hmm_window),
                transitions: transitions
                    .as_deref()
                    .map(TransitionMatrix::load)
                    .transpose()?,
                jobs,
            };
            let report = rapidhare::run_cv(&dataset, &cfg)?;
            if folds {
                for f in &report.folds {
                    writeln!(
                        out,
                        "fold test={} validation={} raw_accuracy={:.2} raw_macro_f1={:.2} tolerant_accuracy={:.2} tolerant_macro_f1={:.2}",
                        f.test_subject,
                        f.validation_subject,
                        f.raw.frame_accuracy(),
                        f.raw.macro_avg.f1,
                        f.tolerant.frame_accuracy(),
                        f.tolerant.macro_avg.f1,
                    )?;
                }
                writeln!(out)?;
            }
            write_report(&mut out, cli.format, "Raw", &report.raw)?;
            if cli.format == Format::Tsv {
                writeln!(out)?;
            }
            write_report(
                &mut out,
                cli.format,
                &format!("Border-tolerant ({tolerance} frames)"),
                &report.tolerant,
            )?;
        }
        Command::Bench {
            model,
            frames,
            repeats,
            method,
            window,
            hmm_window,
        } => {
            let models = read_model_file::<f64>(&model)?;
            let stream = random_frames::<f64>(models.dim(), frames, seed);
            let stats = match Method::from(method) {
                Method::RapidHare => bench_rapidhare(
                    Arc::new(models),
                    &PredictorConfig::with_window(window),
                    &stream,
                    repeats,
                )?,
                Method::Hmm => bench_hmm(
                    &models,
                    &TransitionMatrix::default_activities(),
                    &HmmConfig::uniform(models.len(), hmm_window),
                    &stream,
                    repeats,
                )?,
            };
            write_bench(&mut out, cli.format, &stats)?;
        }
        Command::Synth {
            out_dir,
            spec,
            subjects,
            frames,
            dim,
            min_segment,
        } => {
            let mut params = match &spec {
                Some(path) => SynthParams::load(path)?,
                None => SynthParams::default(),
            };
            if let Some(s) = cli.seed {
                params.seed = s;
            }
            if let Some(v) = subjects {
                params.n_subjects = v;
            }
            if let Some(v) = frames {
                params.frames_per_subject = v;
            }
            if let Some(v) = dim {
                params.dim = v;
            }
            if let Some(v) = min_segment {
                params.min_segment = v;
            }
            let dataset = rapidhare::generate(&SynthSpec::from_params(&params)?)?;
            for path in write_dir(&dataset, &out_dir)? {
                writeln!(out, "{}", path.display())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn predict<R: BufRead, W: Write>(
    reader: R,
    source: &str,
    models: &Arc<ActivityModelSet<f64>>,
    cfg: PredictorConfig<f64>,
    features: &crate::FeatureArgs,
    oracle: bool,
    live: bool,
    out: &mut W,
) -> Result<(), CliError> {
    let mut rec = RecordingReader::new(reader, source, None, false)?;
    let feats = feature_config(features, &rec.channels)?;
    let dim = feats.output_dim(rec.channels.len());
    if dim != models.dim() {
        return Err(rapidhare::Error::DimensionMismatch {
            expected: models.dim(),
            actual: dim,
        }
        .into());
    }
    let names: Vec<&str> = models.labels().iter().map(|l| l.name()).collect();
    writeln!(out, "frame\tlabel\t{}", names.join("\t"))?;
    let mut raw = Vec::with_capacity(rec.channels.len());

    if oracle {
        let mut frames = FrameMatrix::new(rec.channels.len());
        while rec.next_frame::<f64>(&mut raw)?.is_some() {
            frames.push(&raw)?;
        }
        let frames = feats.apply_frames(&frames)?;
        let scores = naive_window_scores(models, frames.view(), &cfg)?;
        for (t, s) in scores.iter().enumerate() {
            let label = models.labels()[rapidhare::predictor::argmax(s)];
            write_prediction(out, t, label.name(), &posterior(s, None))?;
        }
        return Ok(());
    }

    let mut stream = feats.stream::<f64>(rec.channels.len())?;
    let mut session = PredictorSession::new(models.clone(), cfg)?;
    let mut x = Vec::with_capacity(dim);
    let mut t = 0;
    while rec.next_frame::<f64>(&mut raw)?.is_some() {
        stream.push(&raw, &mut x)?;
        let p = session.push(&x)?;
        write_prediction(out, t, p.label.name(), &p.posterior)?;
        if live {
            out.flush()?;
        }
        t += 1;
    }
    Ok(())
}

fn write_prediction<W: Write>(out: &mut W, t: usize, label: &str, post: &[f64]) -> io::Result<()> {
    write!(out, "{t}\t{label}")?;
    for p in post {
        write!(out, "\t{p:.6}")?;
    }
    writeln!(out)
}

fn write_table<W: Write>(
    out: &mut W,
    format: Format,
    header: &[&str],
    rows: &[Vec<String>],
) -> io::Result<()> {
    let mut all: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    all.extend(rows.iter().cloned());
    match format {
        Format::Tsv => {
            for row in &all {
                writeln!(out, "{}", row.join("\t"))?;
            }
        }
        Format::Table => {
            let n_cols = all.iter().map(Vec::len).max().unwrap_or(0);
            let widths: Vec<usize> = (0..n_cols)
                .map(|c| {
                    all.iter()
                        .filter_map(|r| r.get(c))
                        .map(String::len)
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for row in &all {
                let cells: Vec<String> = row
                    .iter()
                    .enumerate()
                    .map(|(c, v)| {
                        if c == 0 {
                            format!("{v:<w$}", w = widths[c])
                        } else {
                            format!("{v:>w$}", w = widths[c])
                        }
                    })
                    .collect();
                writeln!(out, "{}", cells.join("  ").trim_end())?;
            }
        }
    }
    Ok(())
}

fn write_report<W: Write>(
    out: &mut W,
    format: Format,
    title: &str,
    rep: &EvalReport,
) -> io::Result<()> {
    writeln!(
        out,
        "# {title}: accuracy {:.2}%, macro F1 {:.2}%",
        rep.frame_accuracy(),
        rep.macro_avg.f1
    )?;
    let text = format_report(rep, format == Format::Tsv);
    for block in text.split("\n\n") {
        let rows: Vec<Vec<String>> = block
            .lines()
            .map(|l| l.split('\t').map(str::to_string).collect())
            .collect();
        if let Some((header, body)) = rows.split_first() {
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_table(out, format, &header, body)?;
        }
        if format == Format::Table {
            writeln!(out)?;
        }
    }
    Ok(())
}

fn write_bench<W: Write>(out: &mut W, format: Format, s: &BenchStats) -> io::Result<()> {
    let rows = vec![vec![
        s.method.name().to_string(),
        s.frames.to_string(),
        s.repeats.to_string(),
        format!("{:.3}", s.mean_us),
        format!("{:.3}", s.std_us),
        format!("{:.3}", s.p99_us),
    ]];
    write_table(
        out,
        format,
        &["method", "frames", "repeats", "mean_us", "std_us", "p99_us"],
        &rows,
    )
}
