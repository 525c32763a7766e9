//! Trace and summary files.
//!
//! Per-replication CSV files `run_NNNN.csv` carry one row per round; the JSON
//! summary echoes the manifest, its digest, seeds, bound reports and audit
//! outcomes. Files are UTF-8 with LF endings, and every real number in the CSV
//! is printed with 12 significant digits so reruns diff cleanly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::diagnostics::{AuditReport, BoundReport, StepTrace};
use crate::error::{LabError, Result};
use crate::harness::{RunResult, ScalingReport};

pub const CSV_HEADER: &str =
    "t,arm,opt_arm,gap_regret,realized_regret,cum_regret,s_chosen,e_mu,e_theta,saturated_played,x_t,y_t";

const SIG_DIGITS: usize = 12;

/// Formats `x` with exactly 12 significant digits, in positional notation for
/// magnitudes in `[1e-7, 1e16)` and scientific notation otherwise.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-7..16).contains(&exp) {
        return sci;
    }
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::with_capacity(SIG_DIGITS + 10);
    if negative {
        out.push('-');
    }
    if exp >= 0 {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    }
    out
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn fmt_opt(i: Option<usize>) -> String {
    i.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders a trace as CSV text.
pub fn trace_to_csv(trace: &[StepTrace]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            fmt_opt(r.arm),
            fmt_opt(r.opt_arm),
            fmt_num(r.gap_regret),
            fmt_num(r.realized_regret),
            fmt_num(r.cum_regret),
            fmt_num(r.s_chosen),
            fmt_bool(r.e_mu),
            fmt_bool(r.e_theta),
            fmt_bool(r.saturated_played),
            fmt_num(r.x_t),
            fmt_num(r.y_t),
        );
    }
    out
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> LabError {
    LabError::Data(format!("{}:{line}: {msg}", path.display()))
}

/// Parses a trace written by [`trace_to_csv`]. Fields not in the CSV
/// (`g_t`, the `|X_t|` cap, spectra, vectors) are left empty.
pub fn trace_from_csv(text: &str, path: &Path) -> Result<Vec<StepTrace>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(parse_err(path, 1, "unexpected header")),
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(parse_err(path, n, format!("expected 12 fields, got {}", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| parse_err(path, n, format!("{s:?}: {e}")))
        };
        let idx = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| parse_err(path, n, format!("{s:?}: {e}")))
            }
        };
        let flag = |s: &str| -> Result<bool> {
            match s {
                "1" => Ok(true),
                "0" => Ok(false),
                _ => Err(parse_err(path, n, format!("bad flag {s:?}"))),
            }
        };
        out.push(StepTrace {
            t: f[0].parse().map_err(|e| parse_err(path, n, e))?,
            arm: idx(f[1])?,
            opt_arm: idx(f[2])?,
            gap_regret: num(f[3])?,
            realized_regret: num(f[4])?,
            cum_regret: num(f[5])?,
            s_chosen: num(f[6])?,
            e_mu: flag(f[7])?,
            e_theta: flag(f[8])?,
            saturated_played: flag(f[9])?,
            x_t: num(f[10])?,
            y_t: num(f[11])?,
            g_t: f64::NAN,
            x_cap: f64::NAN,
            eigen_slack: None,
            optimal_saturated: false,
            scores: None,
            widths: None,
            saturated: None,
        });
    }
    Ok(out)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<StepTrace>> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    trace_from_csv(&text, path)
}

pub fn csv_name(replication: u64) -> String {
    format!("run_{replication:04}.csv")
}

/// Per-replication entry of the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub mu_star: Vec<f64>,
    pub rounds: usize,
    pub bounds: BoundReport,
    pub invariant_violations: Vec<String>,
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config_digest: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub replications: Vec<ReplicationSummary>,
    pub audit: Option<AuditReport>,
}

impl Summary {
    pub fn build(cfg: &ExperimentConfig, results: &[RunResult], audit: Option<AuditReport>) -> Self {
        Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            config_digest: cfg.digest(),
            master_seed: cfg.seed,
            config: cfg.clone(),
            replications: results
                .iter()
                .map(|r| ReplicationSummary {
                    replication: r.replication,
                    mu_star: r.mu_star.clone(),
                    rounds: r.trace.len(),
                    bounds: r.bounds,
                    invariant_violations: r.invariant_violations.clone(),
                    trace_file: cfg.output.format.csv().then(|| csv_name(r.replication)),
                })
                .collect(),
            audit,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    s.push('\n');
    s
}

/// Writes CSV traces and/or `summary.json` under `dir`. Returns the paths written.
pub fn emit_output(
    cfg: &ExperimentConfig,
    results: &[RunResult],
    audit: Option<AuditReport>,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(LabError::Config("nothing to write: no results".into()));
    }
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let mut cfg = cfg.clone();
    cfg.output.format = format;
    if format.csv() {
        for r in results {
            let path = dir.join(csv_name(r.replication));
            write_file(&path, &trace_to_csv(&r.trace))?;
            written.push(path);
        }
    }
    if format.json() {
        let path = dir.join("summary.json");
        write_file(&path, &to_json(&Summary::build(&cfg, results, audit)))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Data(format!("{}: {e}", path.display())))
}

pub fn emit_scaling(report: &ScalingReport, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("scaling.json");
    write_file(&path, &to_json(report))?;
    Ok(path)
}

pub fn emit_audit(report: &AuditReport, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("audit.json");
    write_file(&path, &to_json(report))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.5), "0.500000000000");
        assert_eq!(fmt_num(1.0), "1.00000000000");
        assert_eq!(fmt_num(-1209.744920335515), "-1209.74492034");
        assert_eq!(fmt_num(0.000123), "0.000123000000000");
        assert_eq!(fmt_num(1e20), "1.00000000000e20");
        assert_eq!(fmt_num(9.999999999999999), "10.0000000000");
        assert_eq!(fmt_num(123456789012345.0), "123456789012000");
    }

    proptest! {
        #[test]
        fn formatted_numbers_parse_back_close(x in -1e9f64..1e9) {
            let back: f64 = fmt_num(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
        }
    }
}
