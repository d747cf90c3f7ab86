//! CSV outputs. Floats are written in scientific notation with 17
//! significant digits, which round-trips every `f64` exactly.

use std::io::Write;

use super::{fit_scaling, RunResult, SweepRow};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str =
    "instance_id,K,T,seed,round,cumulative_regret,realized_gain_sum,good_event_violated";

pub const SUMMARY_HEADER: &str =
    "instance_family,K,T,replications,mean_regret,stderr,slope_to_date";

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '"', '\n', '\r']) {
        return Err(Error::Config(format!(
            "identifier {label:?} must be non-empty and free of commas, quotes and newlines"
        )));
    }
    Ok(())
}

fn io_err(e: std::io::Error) -> Error {
    Error::Config(format!("cannot write output: {e}"))
}

/// One row per checkpoint per run, runs in the order given.
pub fn write_results_csv<W: Write>(
    mut out: W,
    instance_id: &str,
    k: usize,
    runs: &[RunResult],
) -> Result<()> {
    check_label(instance_id)?;
    writeln!(out, "{RESULTS_HEADER}").map_err(io_err)?;
    for run in runs {
        for c in &run.trajectory {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                instance_id,
                k,
                run.horizon,
                run.seed,
                c.round,
                format_float(c.cumulative_regret),
                format_float(c.realized_gain_sum),
                c.good_event_violated as u8
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

/// One row per horizon. `slope_to_date` fits all rows up to and including
/// the current one and is left empty until three positive rows exist.
pub fn write_summary_csv<W: Write>(
    mut out: W,
    family: &str,
    k: usize,
    rows: &[SweepRow],
) -> Result<()> {
    check_label(family)?;
    writeln!(out, "{SUMMARY_HEADER}").map_err(io_err)?;
    let mut points = Vec::new();
    for row in rows {
        if row.mean_regret > 0.0 {
            points.push((row.horizon as f64, row.mean_regret));
        }
        let slope = fit_scaling(&points)
            .map(|f| format_float(f.slope))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            family,
            k,
            row.horizon,
            row.replications,
            format_float(row.mean_regret),
            format_float(row.stderr),
            slope
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance_id: String,
    pub k: usize,
    pub horizon: u64,
    pub seed: u64,
    pub round: u64,
    pub cumulative_regret: f64,
    pub realized_gain_sum: f64,
    pub good_event_violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub instance_family: String,
    pub k: usize,
    pub horizon: u64,
    pub replications: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub slope_to_date: Option<f64>,
}

fn parse<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: bad {name} value {field:?}")))
}

fn rows<'a>(text: &'a str, header: &str, width: usize) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::Config(format!("expected header {header:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != width {
                return Err(Error::Config(format!(
                    "line {}: expected {width} columns, got {}",
                    i + 2,
                    fields.len()
                )));
            }
            Ok((i + 2, fields))
        })
        .collect()
}

pub fn read_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    rows(text, RESULTS_HEADER, 8)?
        .into_iter()
        .map(|(n, f)| {
            Ok(ResultRow {
                instance_id: f[0].to_string(),
                k: parse(f[1], "K", n)?,
                horizon: parse(f[2], "T", n)?,
                seed: parse(f[3], "seed", n)?,
                round: parse(f[4], "round", n)?,
                cumulative_regret: parse(f[5], "cumulative_regret", n)?,
                realized_gain_sum: parse(f[6], "realized_gain_sum", n)?,
                good_event_violated: match f[7] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Config(format!(
                            "line {n}: good_event_violated must be 0 or 1, got {other:?}"
                        )))
                    }
                },
            })
        })
        .collect()
}

pub fn read_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    rows(text, SUMMARY_HEADER, 7)?
        .into_iter()
        .map(|(n, f)| {
            Ok(SummaryRow {
                instance_family: f[0].to_string(),
                k: parse(f[1], "K", n)?,
                horizon: parse(f[2], "T", n)?,
                replications: parse(f[3], "replications", n)?,
                mean_regret: parse(f[4], "mean_regret", n)?,
                stderr: parse(f[5], "stderr", n)?,
                slope_to_date: if f[6].is_empty() {
                    None
                } else {
                    Some(parse(f[6], "slope_to_date", n)?)
                },
            })
        })
        .collect()
}
