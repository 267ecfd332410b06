use serde::{Deserialize, Serialize};

use super::report::{RunReport, SeriesSummary};

/// Outcome of comparing one measured series with its envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub envelope: String,
    pub series_id: String,
    pub passed: bool,
    /// Largest `measured − allowance − bound` over the grid; positive means
    /// a violation.
    pub max_margin: f64,
    pub worst_t: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config_hash: String,
    pub checks: Vec<EnvelopeCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, envelope: &str, series_id: &str) -> Option<&EnvelopeCheck> {
        self.checks.iter().find(|c| c.envelope == envelope && c.series_id == series_id)
    }
}

fn compare(
    grid: &[usize],
    envelope: &str,
    measured: &SeriesSummary,
    bound: &SeriesSummary,
    stderr_allowance: f64,
) -> EnvelopeCheck {
    let mut max_margin = f64::NEG_INFINITY;
    let mut worst_t = 0;
    let mut violations = 0;
    for (k, &t) in grid.iter().enumerate() {
        let margin = measured.mean[k] - stderr_allowance * measured.stderr[k] - bound.mean[k];
        if !margin.is_finite() || margin > 0.0 {
            violations += 1;
        }
        if margin > max_margin || margin.is_nan() {
            max_margin = margin;
            worst_t = t;
        }
    }
    EnvelopeCheck {
        envelope: envelope.to_string(),
        series_id: measured.series_id.clone(),
        passed: violations == 0,
        max_margin,
        worst_t,
        violations,
    }
}

/// Checks the measured series of a run against the theoretical envelopes.
///
/// Regret and consensus errors must stay below their bounds; the gap and
/// the mean-square error get an allowance of three standard errors.
pub fn verify_bounds(report: &RunReport) -> VerificationReport {
    let grid = &report.grid;
    let mut checks = Vec::new();
    for regret in report.metric("regret") {
        for (id, name) in [("cc", "regret_cc"), ("sc", "regret_sc")] {
            if let Some(bound) = report.series("regret_bound", id) {
                checks.push(compare(grid, name, regret, bound, 0.0));
            }
        }
    }
    if let (Some(gap), Some(bound)) = (report.series("gap", "all"), report.series("gap_bound", "all")) {
        checks.push(compare(grid, "gap", gap, bound, 3.0));
    }
    if let (Some(mse), Some(bound)) = (report.series("mse", "all"), report.series("mse_bound", "all")) {
        checks.push(compare(grid, "mse", mse, bound, 3.0));
    }
    for err in report.metric("consensus_error") {
        let net = err.series_id.split('/').next().unwrap_or_default();
        if let Some(bound) = report.series("consensus_envelope", net) {
            checks.push(compare(grid, "consensus", err, bound, 0.0));
        }
    }
    VerificationReport { config_hash: report.config_hash.clone(), checks }
}
