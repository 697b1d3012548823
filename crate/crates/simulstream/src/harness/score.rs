//! Offline re-scoring of an existing record log, without rerunning any
//! session. Produces the same report the run wrote (wall-clock-derived RTF
//! is included only on request, since scripted runs have no meaningful wall
//! times).

use std::path::Path;

use crate::metrics::{aggregate_report, MetricReport};

use super::run::read_records;
use super::HarnessError;

pub fn cmd_score(records_path: &Path, with_rtf: bool) -> Result<MetricReport, HarnessError> {
    let records = read_records(records_path)?;
    Ok(aggregate_report(&records, with_rtf)?)
}
