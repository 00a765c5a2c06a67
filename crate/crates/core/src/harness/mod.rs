//! Experiment grid: datasets × algorithms × trials × k, every selection
//! metric on each cell, and summaries of the resulting records.

mod aggregate;
mod config;
mod record;
mod run;
mod select;

pub use aggregate::{aggregate, write_summary_csv, GroupDim, MeanSd, SummaryRow};
pub use config::{DatasetSource, DatasetType, ExperimentConfig, MetricKind};
pub use record::{count_retrievals, read_jsonl, write_jsonl, CellKey, ExperimentRecord, RecordError};
pub use run::{cell_seed, run_experiment};
pub use select::{select_k, PerKDiagnostic, SelectOptions, SelectionResult};
