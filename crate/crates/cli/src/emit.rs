//! Bit-stable CSV / JSONL rendering of sweep results.

use std::fmt::Write as _;

use lasso_lab::ensemble::Regime;
use lasso_lab::experiment::SweepResult;
use serde::{Deserialize, Serialize};

/// Column order of the CSV output and key order of each JSONL object.
pub const CSV_HEADER: &str =
    "p,regime,theta,s,n,lambda,trials,successes,p_hat,ci_lo,ci_hi,ambiguous";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

/// One output row. Float fields hold values already rounded to six
/// significant digits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub p: usize,
    pub regime: Regime,
    pub theta: f64,
    pub s: usize,
    pub n: usize,
    pub lambda: f64,
    pub trials: usize,
    pub successes: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ambiguous: usize,
}

/// `%.6g`-style rendering: six significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn fmt_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn round_g6(v: f64) -> f64 {
    fmt_g6(v).parse().unwrap_or(v)
}

pub fn rows(result: &SweepResult) -> Vec<SweepRow> {
    result
        .cells
        .iter()
        .map(|c| SweepRow {
            p: c.p,
            regime: c.regime,
            theta: round_g6(c.theta),
            s: c.s,
            n: c.n,
            lambda: round_g6(c.lambda),
            trials: c.trials,
            successes: c.successes,
            p_hat: round_g6(c.p_hat),
            ci_lo: round_g6(c.ci_lo),
            ci_hi: round_g6(c.ci_hi),
            ambiguous: c.ambiguous,
        })
        .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.regime,
            fmt_g6(r.theta),
            r.s,
            r.n,
            fmt_g6(r.lambda),
            r.trials,
            r.successes,
            fmt_g6(r.p_hat),
            fmt_g6(r.ci_lo),
            fmt_g6(r.ci_hi),
            r.ambiguous
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn to_jsonl(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("rows serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> serde_json::Result<Vec<SweepRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Renders a sweep in the requested format.
pub fn emit_results(result: &SweepResult, format: Format) -> String {
    let rows = rows(result);
    match format {
        Format::Csv => to_csv(&rows),
        Format::Jsonl => to_jsonl(&rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lasso_lab::experiment::{wilson_interval, SweepCell};

    #[test]
    fn g6_formatting() {
        assert_eq!(fmt_g6(0.5), "0.5");
        assert_eq!(fmt_g6(1.0), "1");
        assert_eq!(fmt_g6(0.4305174), "0.430517");
        assert_eq!(fmt_g6(123456.7), "123457");
        assert_eq!(fmt_g6(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g6(0.0001), "0.0001");
        assert_eq!(fmt_g6(0.00001234), "1.234e-05");
        assert_eq!(fmt_g6(-2.5), "-2.5");
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(0.1 + 0.2), "0.3");
        assert_eq!(fmt_g6(9.999996), "10");
    }

    fn cell(successes: usize, trials: usize) -> SweepCell {
        let (ci_lo, ci_hi) = wilson_interval(successes, trials, 1.96);
        SweepCell {
            p: 128,
            regime: Regime::FractionalPower,
            theta: 1.0,
            s: 15,
            n: 158,
            lambda: 0.2849,
            trials,
            successes,
            p_hat: successes as f64 / trials as f64,
            ci_lo,
            ci_hi,
            ambiguous: 0,
            singular: 0,
            solver_runs: 0,
            disagreements: 0,
            mean_kkt_residual: 0.0,
        }
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let out = emit_results(&SweepResult::default(), Format::Csv);
        assert_eq!(out, format!("{CSV_HEADER}\n"));
        assert_eq!(emit_results(&SweepResult::default(), Format::Jsonl), "");
    }

    #[test]
    fn half_success_row() {
        let res = SweepResult {
            cells: vec![cell(100, 200)],
        };
        let csv = emit_results(&res, Format::Csv);
        let row = csv.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "128,fractional_power,1,15,158,0.2849,200,100,0.5,0.43136,0.56864,0"
        );
    }

    #[test]
    fn jsonl_rows_match_csv_rows() {
        let res = SweepResult {
            cells: vec![cell(3, 10), cell(0, 10), cell(10, 10)],
        };
        let csv = emit_results(&res, Format::Csv);
        let jsonl = emit_results(&res, Format::Jsonl);
        assert_eq!(csv.lines().count() - 1, jsonl.lines().count());
        let first = jsonl.lines().next().unwrap();
        let positions: Vec<usize> = CSV_HEADER
            .split(',')
            .map(|k| first.find(&format!("\"{k}\":")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(parse_jsonl(&jsonl).unwrap(), rows(&res));
    }
}
