//! CSV and JSON export of experiment results.
//!
//! Numbers are written with Rust's shortest round-trip float formatting, which
//! is locale independent, so identical results give byte-identical files.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::channel_sim::{CdfSeries, Method, ResultSet, ScenarioConfig};

pub const SNR_CDF_FILE: &str = "snr_cdf.csv";
pub const VIOLATION_COUNT_FILE: &str = "violations_count_cdf.csv";
pub const VIOLATION_PCT_FILE: &str = "violations_maxpct_cdf.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn cdf_csv<'a>(header: &str, series: impl Iterator<Item = (Method, &'a CdfSeries)>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push_str("\r\n");
    for (method, cdf) in series {
        for (v, p) in cdf.values.iter().zip(&cdf.probabilities) {
            let _ = write!(out, "{method},{v},{p}\r\n");
        }
    }
    out
}

/// `method,snr_db,cdf` rows for every method.
pub fn snr_cdf_csv(rs: &ResultSet) -> String {
    cdf_csv(
        "method,snr_db,cdf",
        rs.summaries.iter().map(|s| (s.method, &s.snr_cdf)),
    )
}

pub fn violation_count_csv(rs: &ResultSet) -> String {
    cdf_csv(
        "method,violating_antennas,cdf",
        rs.summaries
            .iter()
            .map(|s| (s.method, &s.violation_count_cdf)),
    )
}

pub fn violation_pct_csv(rs: &ResultSet) -> String {
    cdf_csv(
        "method,max_percent_violation,cdf",
        rs.summaries
            .iter()
            .map(|s| (s.method, &s.violation_max_percent_cdf)),
    )
}

#[derive(Debug, Serialize)]
pub struct MethodSummaryJson {
    pub method: Method,
    pub median_snr_db: f64,
    pub median_sum_mse: f64,
    pub median_violation_count: f64,
    pub median_max_percent_violation: f64,
    pub fraction_trials_ge7_violations: f64,
}

/// Between-method median carrier-SNR gaps in dB (absent when a method was not run).
#[derive(Debug, Serialize)]
pub struct GapsJson {
    pub cyclic_minus_projected_db: Option<f64>,
    pub total_power_minus_cyclic_db: Option<f64>,
    pub percarrier_minus_projected_db: Option<f64>,
    pub cyclic_minus_naive_db: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SummaryJson<'a> {
    pub config: &'a ScenarioConfig,
    pub trials: usize,
    pub methods: Vec<MethodSummaryJson>,
    pub median_snr_gaps: GapsJson,
}

pub fn summary(rs: &ResultSet) -> SummaryJson<'_> {
    use Method::*;
    SummaryJson {
        config: &rs.config,
        trials: rs.trials.len(),
        methods: rs
            .summaries
            .iter()
            .map(|s| MethodSummaryJson {
                method: s.method,
                median_snr_db: s.median_snr_db,
                median_sum_mse: s.median_sum_mse,
                median_violation_count: s.median_violation_count,
                median_max_percent_violation: s.median_max_percent,
                fraction_trials_ge7_violations: s.fraction_trials_ge7_violations,
            })
            .collect(),
        median_snr_gaps: GapsJson {
            cyclic_minus_projected_db: rs.median_gap_db(CyclicMulticarrier, ProjectedEigenvector),
            total_power_minus_cyclic_db: rs.median_gap_db(TotalPower, CyclicMulticarrier),
            percarrier_minus_projected_db: rs.median_gap_db(PercarrierCyclic, ProjectedEigenvector),
            cyclic_minus_naive_db: rs.median_gap_db(CyclicMulticarrier, NaiveScaled),
        },
    }
}

pub fn summary_json(rs: &ResultSet) -> String {
    let mut s = serde_json::to_string_pretty(&summary(rs)).expect("summary is plain data");
    s.push('\n');
    s
}

/// Writes the CDF CSVs and `summary.json` into `dir`, returning the paths written.
pub fn write_outputs(rs: &ResultSet, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (SNR_CDF_FILE, snr_cdf_csv(rs)),
        (VIOLATION_COUNT_FILE, violation_count_csv(rs)),
        (VIOLATION_PCT_FILE, violation_pct_csv(rs)),
        (SUMMARY_FILE, summary_json(rs)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
