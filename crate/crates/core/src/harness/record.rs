use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::{DatasetType, MetricKind};
use crate::algorithms::Algorithm;
use crate::error::{Error, Result};
use crate::seed::RngSeed;

/// Failure of one grid cell or one metric within it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    /// `load`, `fit`, `select` or `evaluate`.
    pub operation: String,
    pub code: String,
    pub message: String,
}

impl RecordError {
    pub fn new(operation: &str, error: &Error) -> Self {
        RecordError {
            operation: operation.to_string(),
            code: error.code().to_string(),
            message: error.to_string(),
        }
    }
}

/// Outcome of one metric on one (dataset, algorithm, trial) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub dataset_type: DatasetType,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub metric: MetricKind,
    pub k_hat: Option<usize>,
    pub k_star: Option<usize>,
    pub nmi: Option<f64>,
    /// Mean adjusted out-of-sample R² with the selected clusters as extra predictors.
    pub r2_adj_out: Option<f64>,
    /// The same without cluster indicators.
    pub r2_adj_out_base: Option<f64>,
    /// Partitions fitted for the cell, shared by all its metrics.
    pub retrievals: usize,
    pub wall_time_ms: u64,
    pub seed_used: RngSeed,
    pub error: Option<RecordError>,
}

/// Identifies one cell of the grid.
pub type CellKey = (String, Algorithm, usize);

impl ExperimentRecord {
    pub fn cell(&self) -> CellKey {
        (self.dataset.clone(), self.algorithm, self.trial)
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    /// Equality ignoring `wall_time_ms`.
    pub fn same_values(&self, other: &ExperimentRecord) -> bool {
        ExperimentRecord {
            wall_time_ms: 0,
            ..self.clone()
        } == ExperimentRecord {
            wall_time_ms: 0,
            ..other.clone()
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Retrievals fitted across the distinct cells in `records`.
pub fn count_retrievals(records: &[ExperimentRecord]) -> usize {
    let mut per_cell: BTreeMap<CellKey, usize> = BTreeMap::new();
    for r in records {
        per_cell.insert(r.cell(), r.retrievals);
    }
    per_cell.values().sum()
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[ExperimentRecord]) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", r.to_json_line())?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads JSON Lines. Blank lines are skipped; a malformed line is an error
/// carrying its 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::ParseError {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
