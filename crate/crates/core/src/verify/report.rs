//! Experiment reports and their serializations: line-delimited JSON records
//! plus a flat CSV with one row per estimated quantity.
//!
//! Output bytes are a pure function of the report contents; wall-clock
//! runtime is kept in memory for console display but never serialized, so
//! identical configurations produce identical files.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without a pass/fail judgement: the estimated constants are
    /// not pinned by theory (drifted processes), but finiteness and sign
    /// checks still ran.
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One estimated quantity inside a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    /// Abscissa for fit points (radius, time, fraction, …), when meaningful.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x: Option<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_hi: Option<f64>,
    /// Closed-form reference value, when one exists.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<f64>,
}

impl Quantity {
    pub fn plain(name: impl Into<String>, value: f64) -> Self {
        Quantity {
            name: name.into(),
            x: None,
            value,
            stderr: None,
            ci_lo: None,
            ci_hi: None,
            oracle: None,
        }
    }

    pub fn with_se(name: impl Into<String>, value: f64, stderr: f64) -> Self {
        Quantity {
            stderr: Some(stderr),
            ..Quantity::plain(name, value)
        }
    }

    pub fn point(name: impl Into<String>, x: f64, value: f64, stderr: f64) -> Self {
        Quantity {
            x: Some(x),
            stderr: Some(stderr),
            ..Quantity::plain(name, value)
        }
    }

    pub fn oracle(mut self, v: f64) -> Self {
        self.oracle = Some(v);
        self
    }

    pub fn ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci_lo = Some(lo);
        self.ci_hi = Some(hi);
        self
    }
}

/// The outcome of one registered experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    /// Neutral identifier of the inequality or property being checked.
    pub claim: String,
    pub params: Vec<(String, String)>,
    pub quantities: Vec<Quantity>,
    pub verdict: Verdict,
    pub seed: u64,
    pub registry_version: String,
    /// Wall-clock milliseconds; console diagnostics only.
    #[serde(skip)]
    pub runtime_ms: u128,
}

pub const CSV_HEADER: &str =
    "kind,claim,quantity,x,value,stderr,ci_lo,ci_hi,oracle,verdict,seed,registry,params";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format_float(v)).unwrap_or_default()
}

/// Shortest round-trip decimal form; stable across runs and platforms.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

impl ExperimentReport {
    pub fn params_packed(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// One CSV row per quantity, in fixed column order.
    pub fn csv_rows(&self) -> Vec<String> {
        self.quantities
            .iter()
            .map(|q| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    self.kind,
                    self.claim,
                    q.name,
                    fmt_opt(q.x),
                    format_float(q.value),
                    fmt_opt(q.stderr),
                    fmt_opt(q.ci_lo),
                    fmt_opt(q.ci_hi),
                    fmt_opt(q.oracle),
                    self.verdict,
                    self.seed,
                    self.registry_version,
                    self.params_packed()
                )
            })
            .collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }

    /// Console summary: one line with the verdict.
    pub fn summary_line(&self) -> String {
        format!(
            "[{}] {} ({}) — {} quantities, {} ms",
            self.verdict.to_string().to_uppercase(),
            self.kind,
            self.claim,
            self.quantities.len(),
            self.runtime_ms
        )
    }
}

/// Render a full CSV (header plus all rows of all reports).
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for row in r.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

/// Render the line-delimited JSON record file.
pub fn reports_to_jsonl(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        ExperimentReport {
            kind: "exit_tail".into(),
            claim: "exit-time-tail-two-sided".into(),
            params: vec![("radius".into(), "1".into()), ("dim".into(), "2".into())],
            quantities: vec![
                Quantity::point("survival", 0.5, 0.23, 0.001).oracle(0.2301),
                Quantity::with_se("rate", 2.9, 0.05).ci(2.8, 3.0),
            ],
            verdict: Verdict::Pass,
            seed: 42,
            registry_version: "v1".into(),
            runtime_ms: 1234,
        }
    }

    #[test]
    fn csv_rows_have_fixed_columns() {
        let r = sample();
        let rows = r.csv_rows();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.matches(',').count(), CSV_HEADER.matches(',').count());
        }
        assert!(rows[0].contains("exit_tail"));
        assert!(rows[1].contains("2.8"));
    }

    #[test]
    fn runtime_is_not_serialized() {
        let r = sample();
        let js = r.to_json_line();
        assert!(!js.contains("runtime"));
        let mut r2 = r.clone();
        r2.runtime_ms = 9999;
        assert_eq!(js, r2.to_json_line());
        assert_eq!(reports_to_csv(&[r.clone()]), reports_to_csv(&[r2]));
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back: ExperimentReport = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back.kind, r.kind);
        assert_eq!(back.quantities.len(), 2);
        assert_eq!(back.verdict, Verdict::Pass);
    }
}
