//! Latency sweep: one run per min_read_time value, collected into a CSV
//! suitable for plotting a quality/latency curve. Rows carry the knob value
//! in sweep order; no monotonicity is implied or asserted.

use std::fs;
use std::path::PathBuf;

use crate::metrics::MetricReport;

use super::run::{cmd_run, csv_header, csv_row};
use super::{HarnessError, RunConfig};

#[derive(Debug)]
pub struct CurvePoint {
    pub min_read_time_ms: u64,
    pub report: Option<MetricReport>,
    pub failures: Vec<(String, String)>,
}

#[derive(Debug)]
pub struct CurveSummary {
    pub points: Vec<CurvePoint>,
    pub csv_path: PathBuf,
}

impl CurveSummary {
    pub fn failure_count(&self) -> usize {
        self.points.iter().map(|p| p.failures.len()).sum()
    }
}

/// Run the sweep. Per-point failures are recorded and the remaining points
/// continue; each point writes its own records under
/// `<out_dir>/min_read_<value>/`.
pub fn cmd_curve(cfg: &RunConfig) -> Result<CurveSummary, HarnessError> {
    if cfg.sweep.is_empty() {
        return Err(HarnessError::Config(
            "curve requires a non-empty sweep of min_read_time values".into(),
        ));
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|source| HarnessError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;

    let mut points = Vec::with_capacity(cfg.sweep.len());
    let mut rows = vec![csv_header().to_string()];
    for &min_read_time_ms in &cfg.sweep {
        let mut point_cfg = cfg.clone();
        point_cfg.sweep = Vec::new();
        point_cfg.session.min_read_time_ms = min_read_time_ms;
        point_cfg.out_dir = cfg.out_dir.join(format!("min_read_{min_read_time_ms}"));
        match cmd_run(&point_cfg) {
            Ok(summary) => {
                if let Some(report) = &summary.report {
                    rows.push(csv_row(report, min_read_time_ms));
                }
                points.push(CurvePoint {
                    min_read_time_ms,
                    report: summary.report,
                    failures: summary.failures,
                });
            }
            Err(e) => points.push(CurvePoint {
                min_read_time_ms,
                report: None,
                failures: vec![("(run)".into(), e.to_string())],
            }),
        }
    }

    let csv_path = cfg.out_dir.join("curve.csv");
    fs::write(&csv_path, rows.join("\n") + "\n").map_err(|source| HarnessError::Io {
        path: csv_path.clone(),
        source,
    })?;
    Ok(CurveSummary { points, csv_path })
}
