//! Long-format experiment reports.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::numeric::{mean, median, quantile, std_err};
use crate::remote_contiguity::RcCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Replication,
    Summary,
    Diagnostic,
}

impl RowKind {
    pub fn name(self) -> &'static str {
        match self {
            RowKind::Replication => "replication",
            RowKind::Summary => "summary",
            RowKind::Diagnostic => "diagnostic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub kind: RowKind,
    pub n: usize,
    pub replication: Option<usize>,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Recorded-only verdicts do not affect the exit status.
    pub asserted: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
}

/// Summary statistics computed from replication rows.
pub const SUMMARY_STATS: [&str; 7] = ["mean", "median", "q05", "q95", "stderr", "count", "nan_count"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
    /// Event tallies such as domination failures.
    pub tallies: BTreeMap<String, usize>,
    #[serde(skip)]
    pub rc_curves: Vec<RcCurve>,
}

pub fn config_hash(config_json: &str) -> String {
    let digest = Sha256::digest(config_json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentReport {
    pub fn new(experiment: &str, config_json: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            provenance: Provenance {
                config_hash: config_hash(config_json),
                seed,
                code_version: env!("CARGO_PKG_VERSION").into(),
            },
            tallies: BTreeMap::new(),
            rc_curves: Vec::new(),
        }
    }

    pub fn push_replication(&mut self, n: usize, r: usize, statistic: &str, value: f64) {
        self.rows.push(Row {
            kind: RowKind::Replication,
            n,
            replication: Some(r),
            statistic: statistic.into(),
            value,
        });
    }

    pub fn push_diagnostic(&mut self, n: usize, statistic: &str, value: f64) {
        self.rows.push(Row {
            kind: RowKind::Diagnostic,
            n,
            replication: None,
            statistic: statistic.into(),
            value,
        });
    }

    pub fn tally(&mut self, event: &str, count: usize) {
        *self.tallies.entry(event.into()).or_insert(0) += count;
    }

    pub fn verdict(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            asserted: true,
            detail: detail.into(),
        });
    }

    pub fn record(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            asserted: false,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().filter(|v| v.asserted).all(|v| v.passed)
    }

    /// Replication values of `statistic` at `n`, in replication order.
    pub fn values(&self, n: usize, statistic: &str) -> Vec<f64> {
        let mut v: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Replication && r.n == n && r.statistic == statistic)
            .map(|r| (r.replication.unwrap_or(0), r.value))
            .collect();
        v.sort_by_key(|p| p.0);
        v.into_iter().map(|p| p.1).collect()
    }

    pub fn diagnostic(&self, n: usize, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.kind == RowKind::Diagnostic && r.n == n && r.statistic == statistic)
            .map(|r| r.value)
    }

    /// `SUMMARY_STATS` entry for the non-NaN replication values.
    pub fn summary(&self, n: usize, statistic: &str, stat: &str) -> f64 {
        summarize(&self.values(n, statistic), stat)
    }

    /// Replaces summary rows by ones recomputed from replication rows,
    /// ordered by `(n, statistic, stat)`.
    pub fn finalize(&mut self) {
        self.rows.retain(|r| r.kind != RowKind::Summary);
        let mut groups: BTreeMap<(usize, String), Vec<(usize, f64)>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.kind == RowKind::Replication) {
            groups
                .entry((r.n, r.statistic.clone()))
                .or_default()
                .push((r.replication.unwrap_or(0), r.value));
        }
        for ((n, statistic), mut vals) in groups {
            vals.sort_by_key(|p| p.0);
            let v: Vec<f64> = vals.into_iter().map(|p| p.1).collect();
            for stat in SUMMARY_STATS {
                self.rows.push(Row {
                    kind: RowKind::Summary,
                    n,
                    replication: None,
                    statistic: format!("{statistic}:{stat}"),
                    value: summarize(&v, stat),
                });
            }
        }
    }

    /// Columns `(experiment, kind, n, replication, statistic, value)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "kind", "n", "replication", "statistic", "value"])?;
        for r in &self.rows {
            w.write_record([
                self.experiment.as_str(),
                r.kind.name(),
                &r.n.to_string(),
                &r.replication.map(|x| x.to_string()).unwrap_or_default(),
                &r.statistic,
                &format_value(r.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Summary JSON: manifest echo, provenance, verdicts, tallies and the
    /// summary rows.
    pub fn summary_json(&self, manifest: &serde_json::Value) -> serde_json::Value {
        let summaries: Vec<&Row> = self.rows.iter().filter(|r| r.kind != RowKind::Replication).collect();
        serde_json::json!({
            "experiment": self.experiment,
            "manifest": manifest,
            "provenance": self.provenance,
            "passed": self.passed(),
            "verdicts": self.verdicts,
            "tallies": self.tallies,
            "summaries": summaries,
        })
    }
}

/// Shortest round-trip decimal; `NaN`, `inf` and `-inf` spelled out.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn summarize(values: &[f64], stat: &str) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    match stat {
        "count" => finite.len() as f64,
        "nan_count" => (values.len() - finite.len()) as f64,
        _ if finite.is_empty() => f64::NAN,
        "mean" => mean(&finite),
        "median" => median(&finite),
        "q05" => quantile(&finite, 0.05),
        "q95" => quantile(&finite, 0.95),
        "stderr" => std_err(&finite),
        _ => f64::NAN,
    }
}

/// Monotone trend of a sequence; `strict` requires every step to move.
pub fn is_monotone(values: &[f64], increasing: bool, strict: bool) -> bool {
    values.windows(2).all(|w| {
        let (a, b) = if increasing { (w[0], w[1]) } else { (w[1], w[0]) };
        if strict {
            b > a
        } else {
            b >= a
        }
    })
}

/// Weakly decreasing with an overall decrease, or identically zero.
pub fn is_decreasing_trend(values: &[f64]) -> bool {
    if values.iter().any(|v| v.is_nan()) {
        return false;
    }
    if values.iter().all(|&v| v == 0.0) {
        return true;
    }
    is_monotone(values, false, false) && values.last() < values.first()
}

pub fn fmt_seq(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}
