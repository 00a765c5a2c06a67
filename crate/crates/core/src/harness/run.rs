use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{DatasetSource, DatasetType, ExperimentConfig, MetricKind};
use super::record::{CellKey, ExperimentRecord, RecordError};
use super::select::{select_k, SelectOptions};
use crate::algorithms::Algorithm;
use crate::baselines::GapOptions;
use crate::data::{Dataset, Partition};
use crate::datagen::LoadedCsv;
use crate::error::{Error, Result};
use crate::evaluation::{external_regression_eval, nmi};
use crate::seed::RngSeed;

/// A dataset ready for the grid, with whatever its evaluation needs.
struct Prepared {
    dataset: Dataset,
    dataset_type: DatasetType,
    truth: Option<Partition>,
    regression: Option<Regression>,
}

struct Regression {
    predictors: Dataset,
    target: Vec<f64>,
    base_r2: f64,
}

fn data_seed(config: &ExperimentConfig, name: &str, trial: Option<usize>) -> RngSeed {
    match trial {
        Some(t) => config.seed.derive(&[name, "data", &t.to_string()]),
        None => config.seed.derive(&[name, "data"]),
    }
}

/// Seed of one grid cell. Depends on nothing else, so results do not depend
/// on scheduling.
pub fn cell_seed(config_seed: RngSeed, dataset: &str, algorithm: Algorithm, trial: usize) -> RngSeed {
    config_seed.derive(&[dataset, algorithm.name(), &trial.to_string()])
}

fn prepare(source: &DatasetSource, loaded: LoadedCsv, config: &ExperimentConfig) -> Result<Prepared> {
    let LoadedCsv {
        dataset,
        target,
        predictors,
    } = loaded;
    let truth = dataset.ground_truth();
    let dataset_type = match (source, &truth) {
        (DatasetSource::Artificial { .. }, _) => DatasetType::Artificial,
        (_, Some(_)) => DatasetType::Benchmark,
        (_, None) => DatasetType::RealWorld,
    };
    let regression = match (&truth, target, predictors) {
        (Some(_), _, _) => None,
        (None, Some(target), Some(predictors)) => {
            let base = external_regression_eval(&predictors, &target, None, &config.regression)?;
            Some(Regression {
                predictors,
                target,
                base_r2: base.mean_adjusted_r2_out,
            })
        }
        (None, _, _) => {
            return Err(Error::InvalidDataset(format!(
                "dataset `{}` has neither labels nor a regression target with predictors",
                source.name()
            )))
        }
    };
    let dataset = if config.standardize { dataset.standardized() } else { dataset };
    Ok(Prepared {
        dataset,
        dataset_type,
        truth,
        regression,
    })
}

/// Runs the whole grid. Records are appended to `output_path` (JSON Lines)
/// one cell at a time; cells already complete in that file are not rerun.
/// The returned records cover the whole grid in configuration order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let names: Vec<String> = config.datasets.iter().map(DatasetSource::name).collect();

    // fixed datasets are loaded once; regenerated ones per cell
    let shared: Vec<Option<Prepared>> = config
        .datasets
        .iter()
        .zip(&names)
        .map(|(source, name)| {
            let per_trial = config.regenerate_data_per_trial && matches!(source, DatasetSource::Artificial { .. });
            if per_trial {
                // fail early on an unusable source
                source.load(data_seed(config, name, Some(0)))?;
                Ok(None)
            } else {
                prepare(source, source.load(data_seed(config, name, None))?, config).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let existing = match &config.output_path {
        Some(path) => resume_records(path, config)?,
        None => Vec::new(),
    };
    let done: BTreeSet<CellKey> = existing.iter().map(ExperimentRecord::cell).collect();

    let mut cells = Vec::new();
    for (d, name) in names.iter().enumerate() {
        for &algorithm in &config.algorithms {
            for trial in 0..config.trials {
                if !done.contains(&(name.clone(), algorithm, trial)) {
                    cells.push((d, algorithm, trial));
                }
            }
        }
    }

    let sink = match &config.output_path {
        Some(path) => Some(Mutex::new(BufWriter::new(
            OpenOptions::new().create(true).append(true).open(path)?,
        ))),
        None => None,
    };
    let run_cell = |&(d, algorithm, trial): &(usize, Algorithm, usize)| -> Result<Vec<ExperimentRecord>> {
        let name = &names[d];
        let records = match &shared[d] {
            Some(prepared) => cell_records(prepared, name, algorithm, trial, config),
            None => {
                let source = &config.datasets[d];
                match source
                    .load(data_seed(config, name, Some(trial)))
                    .and_then(|loaded| prepare(source, loaded, config))
                {
                    Ok(prepared) => cell_records(&prepared, name, algorithm, trial, config),
                    Err(e) => load_error_records(&e, name, algorithm, trial, config),
                }
            }
        };
        if let Some(sink) = &sink {
            let mut w = sink.lock().expect("record sink poisoned");
            for r in &records {
                writeln!(w, "{}", r.to_json_line())?;
            }
            w.flush()?;
        }
        Ok(records)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let fresh: Vec<Vec<ExperimentRecord>> = pool.install(|| cells.par_iter().map(run_cell).collect::<Result<_>>())?;

    let mut records = existing;
    records.extend(fresh.into_iter().flatten());
    sort_records(&mut records, config);
    Ok(records)
}

fn sort_records(records: &mut [ExperimentRecord], config: &ExperimentConfig) {
    let names: Vec<String> = config.datasets.iter().map(DatasetSource::name).collect();
    let pos = |xs: &[String], x: &String| xs.iter().position(|y| y == x).unwrap_or(usize::MAX);
    records.sort_by_key(|r| {
        (
            pos(&names, &r.dataset),
            config.algorithms.iter().position(|a| *a == r.algorithm).unwrap_or(usize::MAX),
            r.trial,
            config.metrics.iter().position(|m| *m == r.metric).unwrap_or(usize::MAX),
        )
    });
}

/// Keeps only cells with a record for every configured metric and rewrites
/// the file with them, dropping partial cells and a torn final line.
fn resume_records(path: &Path, config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut parsed = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ExperimentRecord>(&line) {
            Ok(r) => parsed.push(r),
            Err(_) => break,
        }
    }
    let wanted: BTreeSet<MetricKind> = config.metrics.iter().copied().collect();
    let names: BTreeSet<String> = config.datasets.iter().map(DatasetSource::name).collect();
    let mut by_cell: BTreeMap<CellKey, Vec<ExperimentRecord>> = BTreeMap::new();
    let in_grid = |r: &ExperimentRecord| {
        names.contains(&r.dataset) && config.algorithms.contains(&r.algorithm) && r.trial < config.trials
    };
    for r in parsed.into_iter().filter(in_grid) {
        by_cell.entry(r.cell()).or_default().push(r);
    }
    let kept: Vec<ExperimentRecord> = by_cell
        .into_values()
        .filter(|rs| rs.len() == wanted.len() && rs.iter().map(|r| r.metric).collect::<BTreeSet<_>>() == wanted)
        .flatten()
        .collect();
    let mut w = BufWriter::new(File::create(path)?);
    for r in &kept {
        writeln!(w, "{}", r.to_json_line())?;
    }
    w.flush()?;
    Ok(kept)
}

/// Regenerated artificial data can fail for one trial only; that cell gets
/// error records and the grid carries on.
fn load_error_records(
    error: &Error,
    name: &str,
    algorithm: Algorithm,
    trial: usize,
    config: &ExperimentConfig,
) -> Vec<ExperimentRecord> {
    config
        .metrics
        .iter()
        .map(|&metric| ExperimentRecord {
            dataset: name.to_string(),
            dataset_type: DatasetType::Artificial,
            algorithm,
            trial,
            metric,
            k_hat: None,
            k_star: None,
            nmi: None,
            r2_adj_out: None,
            r2_adj_out_base: None,
            retrievals: 0,
            wall_time_ms: 0,
            seed_used: cell_seed(config.seed, name, algorithm, trial),
            error: Some(RecordError::new("load", error)),
        })
        .collect()
}

fn cell_records(
    prepared: &Prepared,
    name: &str,
    algorithm: Algorithm,
    trial: usize,
    config: &ExperimentConfig,
) -> Vec<ExperimentRecord> {
    let seed = cell_seed(config.seed, name, algorithm, trial);
    let fit_config = config.algorithm.with_seed(seed);
    let base = |metric: MetricKind, retrievals: usize| ExperimentRecord {
        dataset: name.to_string(),
        dataset_type: prepared.dataset_type,
        algorithm,
        trial,
        metric,
        k_hat: None,
        k_star: None,
        nmi: None,
        r2_adj_out: None,
        r2_adj_out_base: None,
        retrievals,
        wall_time_ms: 0,
        seed_used: seed,
        error: None,
    };

    let started = Instant::now();
    let series = match algorithm.fit_series(&prepared.dataset, config.k_min, config.k_max, &fit_config) {
        Ok(series) => series,
        Err(e) => {
            let elapsed = started.elapsed().as_millis() as u64;
            return config
                .metrics
                .iter()
                .map(|&m| ExperimentRecord {
                    wall_time_ms: elapsed,
                    error: Some(RecordError::new("fit", &e)),
                    ..base(m, 0)
                })
                .collect();
        }
    };
    let fit_ms = started.elapsed().as_millis() as u64;
    let options = SelectOptions {
        alpha: config.alpha,
        gap: GapOptions {
            references: config.gap_b,
            sd_correction: true,
        },
    };

    config
        .metrics
        .iter()
        .map(|&metric| {
            let started = Instant::now();
            let mut record = base(metric, series.len());
            let outcome = select_k(&prepared.dataset, &series, algorithm, metric, &options, &fit_config)
                .map_err(|e| RecordError::new("select", &e))
                .and_then(|sel| {
                    record.k_hat = Some(sel.k_hat);
                    let chosen = series.get(sel.k_hat).map_err(|e| RecordError::new("select", &e))?;
                    evaluate(prepared, chosen, &mut record, config).map_err(|e| RecordError::new("evaluate", &e))
                });
            record.error = outcome.err();
            record.wall_time_ms = fit_ms + started.elapsed().as_millis() as u64;
            record
        })
        .collect()
}

fn evaluate(
    prepared: &Prepared,
    chosen: &Partition,
    record: &mut ExperimentRecord,
    config: &ExperimentConfig,
) -> Result<()> {
    if let Some(truth) = &prepared.truth {
        record.nmi = Some(nmi(truth, chosen)?);
        record.k_star = Some(truth.k());
    } else if let Some(reg) = &prepared.regression {
        let eval = external_regression_eval(&reg.predictors, &reg.target, Some(chosen), &config.regression)?;
        record.r2_adj_out = Some(eval.mean_adjusted_r2_out);
        record.r2_adj_out_base = Some(reg.base_r2);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{ArtificialId, BundledDataset};
    use crate::harness::record::{count_retrievals, read_jsonl};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec![
                DatasetSource::artificial(ArtificialId::E),
                DatasetSource::Bundled {
                    name: BundledDataset::Iris,
                },
            ],
            algorithms: vec![Algorithm::KMeans, Algorithm::Ward],
            trials: 2,
            k_max: 4,
            metrics: vec![MetricKind::InfoGuide, MetricKind::Silhouette, MetricKind::Ch],
            parallelism: 2,
            ..Default::default()
        }
    }

    #[test]
    fn grid_shape_and_ground_truth_fields() {
        let c = small_config();
        let recs = run_experiment(&c).unwrap();
        assert_eq!(recs.len(), 2 * 2 * 2 * 3);
        assert_eq!(count_retrievals(&recs), c.expected_retrievals());
        for r in &recs {
            assert!(r.error.is_none(), "{r:?}");
            assert!(r.nmi.is_some() && r.k_star.is_some());
            assert!(r.r2_adj_out.is_none());
            let k = r.k_hat.unwrap();
            assert!((1..=4).contains(&k));
            if matches!(r.metric, MetricKind::Silhouette | MetricKind::Ch) {
                assert!(k >= 2);
            }
        }
        assert_eq!(recs[0].dataset, "e");
        assert_eq!(recs[0].dataset_type, DatasetType::Artificial);
        assert_eq!(recs.last().unwrap().dataset_type, DatasetType::Benchmark);
    }

    #[test]
    fn single_cell_single_metric() {
        let c = ExperimentConfig {
            trials: 1,
            datasets: vec![DatasetSource::artificial(ArtificialId::B)],
            algorithms: vec![Algorithm::KMeans],
            metrics: vec![MetricKind::Silhouette],
            k_max: 4,
            ..Default::default()
        };
        assert_eq!(run_experiment(&c).unwrap().len(), 1);
    }

    #[test]
    fn parallelism_does_not_change_values() {
        let mut c = small_config();
        c.parallelism = 1;
        let a = run_experiment(&c).unwrap();
        c.parallelism = 3;
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.same_values(y)));
    }

    #[test]
    fn regression_dataset_fills_r2() {
        let c = ExperimentConfig {
            datasets: vec![DatasetSource::Bundled {
                name: BundledDataset::AcsCounties,
            }],
            algorithms: vec![Algorithm::KMeans],
            trials: 1,
            k_max: 3,
            metrics: vec![MetricKind::Ch],
            ..Default::default()
        };
        let recs = run_experiment(&c).unwrap();
        let r = &recs[0];
        assert_eq!(r.dataset_type, DatasetType::RealWorld);
        assert!(r.nmi.is_none() && r.k_star.is_none());
        assert!(r.r2_adj_out.is_some() && r.r2_adj_out_base.is_some());
    }

    #[test]
    fn streams_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let mut c = small_config();
        c.output_path = Some(path.clone());
        let full = run_experiment(&c).unwrap();
        let on_disk = read_jsonl(BufReader::new(File::open(&path).unwrap())).unwrap();
        assert_eq!(on_disk.len(), full.len());

        // simulate an interrupt: keep a partial cell and a torn line
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let mut truncated = lines[..7].join("\n");
        truncated.push_str("\n{\"dataset\":\"e\",\"algo");
        std::fs::write(&path, truncated).unwrap();

        let resumed = run_experiment(&c).unwrap();
        assert_eq!(resumed.len(), full.len());
        assert!(full.iter().zip(&resumed).all(|(a, b)| a.same_values(b)));
        let on_disk = read_jsonl(BufReader::new(File::open(&path).unwrap())).unwrap();
        assert_eq!(on_disk.len(), full.len());
    }

    #[test]
    fn cell_failure_becomes_error_record() {
        // one repeated point: gap needs positive within-cluster dispersion
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("flat.csv");
        let schema = dir.path().join("flat.toml");
        let mut text = String::from("x,label\n");
        for i in 0..12 {
            text.push_str(&format!("1.0,{}\n", i % 2));
        }
        std::fs::write(&csv, text).unwrap();
        std::fs::write(&schema, "feature_columns = [\"x\"]\nlabel_column = \"label\"\n").unwrap();
        let c = ExperimentConfig {
            datasets: vec![DatasetSource::Csv {
                name: "flat".into(),
                path: csv,
                schema,
            }],
            algorithms: vec![Algorithm::KMeans],
            trials: 1,
            k_max: 3,
            metrics: vec![MetricKind::Gap, MetricKind::InfoGuide],
            ..Default::default()
        };
        let recs = run_experiment(&c).unwrap();
        assert_eq!(recs.len(), 2);
        let gap = recs.iter().find(|r| r.metric == MetricKind::Gap).unwrap();
        let err = gap.error.as_ref().unwrap();
        assert_eq!(err.operation, "select");
        assert!(!err.code.is_empty());
    }

    #[test]
    fn unloadable_dataset_is_a_data_error() {
        let c = ExperimentConfig {
            datasets: vec![DatasetSource::Csv {
                name: "x".into(),
                path: "/missing.csv".into(),
                schema: "/missing.toml".into(),
            }],
            ..Default::default()
        };
        assert!(run_experiment(&c).unwrap_err().is_data_error());
    }

    #[test]
    fn load_error_records_cover_every_metric() {
        let c = ExperimentConfig {
            metrics: vec![MetricKind::Ch, MetricKind::Gap],
            ..Default::default()
        };
        let recs = load_error_records(&Error::SeparationInfeasible { separation: 9.0, attempts: 3 }, "b", Algorithm::Gmm, 4, &c);
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.error.as_ref().unwrap().operation == "load" && r.retrievals == 0));
        assert_eq!(recs[0].seed_used, cell_seed(c.seed, "b", Algorithm::Gmm, 4));
    }

    #[test]
    fn regenerated_data_differs_per_trial() {
        let c = ExperimentConfig {
            datasets: vec![DatasetSource::artificial(ArtificialId::E)],
            algorithms: vec![Algorithm::Ward],
            trials: 2,
            k_max: 3,
            metrics: vec![MetricKind::Ch],
            regenerate_data_per_trial: true,
            ..Default::default()
        };
        let recs = run_experiment(&c).unwrap();
        assert_eq!(recs.len(), 2);
        assert_ne!(data_seed(&c, "e", Some(0)), data_seed(&c, "e", Some(1)));
    }
}
