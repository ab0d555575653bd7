//! CSV and JSON writers. Numbers carry 12 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::analysis::{FitResult, SweepRecord};
use crate::error::{Error, Result};
use crate::oracle::OracleComparison;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const SWEEP_CSV_HEADER: &str =
    "N,delta,B,T,c_mu,c_q,advantage,stoch_residual,psd_residual,degenerate";

pub const VALIDATION_CSV_HEADER: &str =
    "N,delta,B,T,L,transition_deviation,stationary_deviation,markov_deviation,within_tolerance";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// `%.12g`-style rendering.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        format_sig(x).parse().expect("formatted number parses")
    } else {
        x
    }
}

/// Copy of a record with every float rounded as it is printed.
pub fn rounded_record(r: &SweepRecord) -> SweepRecord {
    let mut out = r.clone();
    out.delta = round_sig(r.delta);
    out.field = round_sig(r.field);
    out.temperature = round_sig(r.temperature);
    out.c_mu = r.c_mu.map(round_sig);
    out.c_q = r.c_q.map(round_sig);
    out.advantage = r.advantage.map(round_sig);
    out.diagnostics.stoch_residual = round_sig(r.diagnostics.stoch_residual);
    out.diagnostics.psd_residual = round_sig(r.diagnostics.psd_residual);
    out
}

fn opt(x: Option<f64>, missing: &str) -> String {
    x.map_or_else(|| missing.to_string(), format_sig)
}

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in records {
        let failed = r.diagnostics.failure.is_some();
        let advantage = match (r.advantage, failed) {
            (Some(a), _) => format_sig(a),
            (None, true) => "nan".into(),
            (None, false) => "inf".into(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.range,
            format_sig(r.delta),
            format_sig(r.field),
            format_sig(r.temperature),
            opt(r.c_mu, "nan"),
            opt(r.c_q, "nan"),
            advantage,
            format_sig(r.diagnostics.stoch_residual),
            format_sig(r.diagnostics.psd_residual),
            r.diagnostics.degenerate
        ));
    }
    out
}

pub fn records_to_json(records: &[SweepRecord]) -> Result<String> {
    let rounded: Vec<SweepRecord> = records.iter().map(rounded_record).collect();
    to_json(&rounded)
}

pub fn fit_to_json(fit: &FitResult) -> Result<String> {
    let rounded = FitResult {
        exponent: round_sig(fit.exponent),
        intercept: round_sig(fit.intercept),
        r_squared: round_sig(fit.r_squared),
        window: (round_sig(fit.window.0), round_sig(fit.window.1)),
    };
    to_json(&rounded)
}

pub fn fit_to_csv(fit: &FitResult) -> String {
    format!(
        "exponent,intercept,r_squared,window_min,window_max\n{},{},{},{},{}\n",
        format_sig(fit.exponent),
        format_sig(fit.intercept),
        format_sig(fit.r_squared),
        format_sig(fit.window.0),
        format_sig(fit.window.1)
    )
}

/// One validation row: a parameter point checked at one chain length.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ValidationRow {
    #[serde(rename = "N")]
    pub range: usize,
    pub delta: f64,
    #[serde(rename = "B")]
    pub field: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(flatten)]
    pub comparison: OracleComparison,
    pub within_tolerance: bool,
}

pub fn validation_to_csv(rows: &[ValidationRow]) -> String {
    let mut out = String::from(VALIDATION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.comparison;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.range,
            format_sig(r.delta),
            format_sig(r.field),
            format_sig(r.temperature),
            c.chain_len,
            format_sig(c.transition_deviation),
            format_sig(c.stationary_deviation),
            format_sig(c.markov_deviation),
            r.within_tolerance
        ));
    }
    out
}

pub fn validation_to_json(rows: &[ValidationRow]) -> Result<String> {
    let rounded: Vec<ValidationRow> = rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.delta = round_sig(r.delta);
            r.field = round_sig(r.field);
            r.temperature = round_sig(r.temperature);
            r.comparison.transition_deviation = round_sig(r.comparison.transition_deviation);
            r.comparison.stationary_deviation = round_sig(r.comparison.stationary_deviation);
            r.comparison.markov_deviation = round_sig(r.comparison.markov_deviation);
            r
        })
        .collect();
    to_json(&rounded)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(contents: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(contents.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
