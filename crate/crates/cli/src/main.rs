use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infoguide::algorithms::{Algorithm, AlgorithmConfig};
use infoguide::baselines::GapOptions;
use infoguide::datagen::{generate_artificial, load_csv, write_csv, ArtificialId, ArtificialSpec, CsvSchema};
use infoguide::harness::{
    aggregate, read_jsonl, run_experiment, select_k, write_jsonl, write_summary_csv, ExperimentConfig, GroupDim,
    MetricKind, SelectOptions,
};
use infoguide::{Error, RngSeed};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "infoguide", version, about = "Select the number of clusters and run selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an artificial dataset as CSV.
    Generate {
        #[arg(long)]
        spec: ArtificialId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Minimum distance between cluster centres.
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
    },
    /// Run an experiment grid described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_path`; without either, records go to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Select k for one CSV dataset and print the per-k diagnostics as JSON.
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        algorithm: Algorithm,
        #[arg(long)]
        metric: MetricKind,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 11)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Reference datasets for the gap statistic.
        #[arg(long, default_value_t = 10)]
        gap_b: usize,
    },
    /// Summarise JSON Lines records as CSV.
    Report {
        #[arg(long)]
        records: PathBuf,
        /// Comma-separated subset of dataset_type, dataset, algorithm, metric.
        #[arg(long, default_value = "metric")]
        group_by: String,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { EXIT_DATA } else { EXIT_USAGE })
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Generate {
            spec,
            seed,
            out,
            separation,
        } => {
            let spec = ArtificialSpec {
                cluster_separation: separation,
                ..ArtificialSpec::new(spec, RngSeed(seed))
            };
            write_csv(&out, &generate_artificial(&spec)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, output } => {
            let mut config = ExperimentConfig::from_toml_file(&config)?;
            if output.is_some() {
                config.output_path = output;
            }
            let records = run_experiment(&config)?;
            if config.output_path.is_none() {
                write_jsonl(io::stdout().lock(), &records)?;
            }
            let errors = records.iter().filter(|r| r.is_error()).count();
            if errors > 0 {
                eprintln!("{errors} of {} records failed", records.len());
                return Ok(ExitCode::from(EXIT_PARTIAL));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Select {
            data,
            schema,
            algorithm,
            metric,
            k_min,
            k_max,
            seed,
            alpha,
            gap_b,
        } => {
            let schema = CsvSchema::from_toml_file(&schema)?;
            let dataset = load_csv(&data, &schema)?.dataset;
            let config = AlgorithmConfig::default().with_seed(RngSeed(seed));
            let series = algorithm.fit_series(&dataset, k_min, k_max, &config)?;
            let options = SelectOptions {
                alpha,
                gap: GapOptions {
                    references: gap_b,
                    ..GapOptions::default()
                },
            };
            let result = select_k(&dataset, &series, algorithm, metric, &options, &config)?;
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &result).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            records,
            group_by,
            confidence,
        } => {
            let group_by = GroupDim::parse_list(&group_by)?;
            let file = File::open(&records).map_err(|_| Error::FileNotFound(records.clone()))?;
            let records = read_jsonl(BufReader::new(file))?;
            let rows = aggregate(&records, &group_by, confidence)?;
            write_summary_csv(io::stdout().lock(), &group_by, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
