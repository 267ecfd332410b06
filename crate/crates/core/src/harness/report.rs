use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use super::experiment::SweepCell;
use crate::error::{Error, Result};
use crate::metrics::BoundParams;

pub const CSV_HEADER: &str = "t,metric,mean,stderr,series_id,config_hash";

/// Path mean and standard error of one quantity on the recording grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub metric: String,
    pub series_id: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SeriesSummary {
    /// A deterministic series (zero standard error).
    pub fn exact(metric: &str, series_id: &str, values: Vec<f64>) -> Self {
        let stderr = vec![0.0; values.len()];
        SeriesSummary { metric: metric.to_string(), series_id: series_id.to_string(), mean: values, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub grid: Vec<usize>,
    pub series: Vec<SeriesSummary>,
    pub path_seeds: Vec<u64>,
    pub tracked_agents: Vec<usize>,
    pub bound_params: BoundParams,
    pub ne: Option<(Vec<f64>, Vec<f64>)>,
    pub ne_failed: bool,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn series(&self, metric: &str, series_id: &str) -> Option<&SeriesSummary> {
        self.series.iter().find(|s| s.metric == metric && s.series_id == series_id)
    }

    pub fn metric(&self, metric: &str) -> impl Iterator<Item = &SeriesSummary> + '_ {
        let metric = metric.to_string();
        self.series.iter().filter(move |s| s.metric == metric)
    }

    /// Position of round `t` on the recording grid.
    pub fn grid_index(&self, t: usize) -> Option<usize> {
        self.grid.binary_search(&t).ok()
    }

    /// Long-format CSV; `prefix` is prepended to every series id.
    pub fn csv_rows(&self, prefix: &str, out: &mut String) {
        for s in &self.series {
            for (k, &t) in self.grid.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{t},{},{},{},{prefix}{},{}",
                    s.metric, s.mean[k], s.stderr[k], s.series_id, self.config_hash
                );
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        self.csv_rows("", &mut out);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `results.csv` and/or `report.json` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    for format in &report.config.output.formats {
        match format {
            OutputFormat::Csv => write_atomic(&dir.join("results.csv"), report.to_csv().as_bytes())?,
            OutputFormat::Json => write_atomic(&dir.join("report.json"), report.to_json()?.as_bytes())?,
        }
    }
    Ok(())
}

/// Combined long-format CSV of the successful cells; series ids are
/// prefixed with the cell label.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for cell in cells {
        if let Ok(report) = &cell.result {
            report.csv_rows(&format!("{}/", cell.label), &mut out);
        }
    }
    out
}

#[derive(Serialize)]
struct CellSummary<'a> {
    label: &'a str,
    config_hash: String,
    error: Option<String>,
}

/// Per-cell reports under `dir/<label>/`, plus `sweep.csv` and a summary
/// listing failed cells.
pub fn write_sweep(cells: &[SweepCell], dir: &Path) -> Result<()> {
    for cell in cells {
        if let Ok(report) = &cell.result {
            write_report(report, &dir.join(&cell.label))?;
        }
    }
    write_atomic(&dir.join("sweep.csv"), sweep_csv(cells).as_bytes())?;
    let summary: Vec<CellSummary> = cells
        .iter()
        .map(|c| CellSummary {
            label: &c.label,
            config_hash: c.config.config_hash(),
            error: c.result.as_ref().err().map(ToString::to_string),
        })
        .collect();
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(&dir.join("sweep_summary.json"), json.as_bytes())
}
