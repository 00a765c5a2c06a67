use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, AlgorithmConfig};
use crate::datagen::{
    generate_artificial, load_bundled, load_csv, ArtificialId, ArtificialSpec, BundledDataset, CsvSchema, LoadedCsv,
};
use crate::error::{Error, Result};
use crate::evaluation::RegressionEvalConfig;
use crate::seed::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    InfoGuide,
    Silhouette,
    Ch,
    Gap,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::InfoGuide, MetricKind::Silhouette, MetricKind::Ch, MetricKind::Gap];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::InfoGuide => "infoguide",
            MetricKind::Silhouette => "silhouette",
            MetricKind::Ch => "ch",
            MetricKind::Gap => "gap",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetType {
    Artificial,
    /// Labelled data with a known number of classes.
    Benchmark,
    /// No ground truth; evaluated through a regression target.
    RealWorld,
}

impl DatasetType {
    pub fn name(self) -> &'static str {
        match self {
            DatasetType::Artificial => "artificial",
            DatasetType::Benchmark => "benchmark",
            DatasetType::RealWorld => "real_world",
        }
    }
}

impl fmt::Display for DatasetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_separation() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Artificial {
        id: ArtificialId,
        #[serde(default = "default_separation")]
        cluster_separation: f64,
    },
    Bundled {
        name: BundledDataset,
    },
    Csv {
        name: String,
        path: PathBuf,
        schema: PathBuf,
    },
}

impl DatasetSource {
    pub fn artificial(id: ArtificialId) -> Self {
        DatasetSource::Artificial {
            id,
            cluster_separation: default_separation(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DatasetSource::Artificial { id, .. } => id.name().to_string(),
            DatasetSource::Bundled { name } => name.name().to_string(),
            DatasetSource::Csv { name, .. } => name.clone(),
        }
    }

    /// Materializes the source. `seed` only affects artificial data.
    pub fn load(&self, seed: RngSeed) -> Result<LoadedCsv> {
        match self {
            DatasetSource::Artificial { id, cluster_separation } => {
                let spec = ArtificialSpec {
                    cluster_separation: *cluster_separation,
                    ..ArtificialSpec::new(*id, seed)
                };
                Ok(LoadedCsv {
                    dataset: generate_artificial(&spec)?.with_name(id.name()),
                    target: None,
                    predictors: None,
                })
            }
            DatasetSource::Bundled { name } => load_bundled(*name),
            DatasetSource::Csv { name, path, schema } => {
                let schema = CsvSchema::from_toml_file(schema)?;
                let mut loaded = load_csv(path, &schema)?;
                loaded.dataset = loaded.dataset.with_name(name.clone());
                Ok(loaded)
            }
        }
    }
}

/// One experiment grid. Every field has a default, so an empty TOML file
/// describes the full default grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub metrics: Vec<MetricKind>,
    pub alpha: f64,
    #[serde(alias = "gap_B")]
    pub gap_b: usize,
    pub seed: RngSeed,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub output_path: Option<PathBuf>,
    /// Z-score features before clustering.
    pub standardize: bool,
    /// Draw fresh artificial data for every trial instead of one dataset per
    /// configuration seed.
    pub regenerate_data_per_trial: bool,
    /// Fitting settings; the seed inside is replaced per cell.
    pub algorithm: AlgorithmConfig,
    pub regression: RegressionEvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut datasets: Vec<DatasetSource> = ArtificialId::ALL.into_iter().map(DatasetSource::artificial).collect();
        datasets.extend(BundledDataset::ALL.into_iter().map(|name| DatasetSource::Bundled { name }));
        ExperimentConfig {
            datasets,
            algorithms: Algorithm::ALL.to_vec(),
            trials: 30,
            k_min: 1,
            k_max: 11,
            metrics: MetricKind::ALL.to_vec(),
            alpha: 0.05,
            gap_b: 10,
            seed: RngSeed(0),
            parallelism: 0,
            output_path: None,
            standardize: false,
            regenerate_data_per_trial: false,
            algorithm: AlgorithmConfig::default(),
            regression: RegressionEvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms".into());
        }
        if self.metrics.is_empty() {
            return bad("no metrics".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.k_min == 0 {
            return bad("k_min must be >= 1".into());
        }
        if self.k_max <= self.k_min {
            return bad(format!("k_max ({}) must exceed k_min ({})", self.k_max, self.k_min));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.metrics.contains(&MetricKind::Gap) && self.gap_b < 2 {
            return Err(Error::InvalidB(self.gap_b));
        }
        let mut names: Vec<String> = self.datasets.iter().map(DatasetSource::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate dataset name `{}`", w[0]));
        }
        self.algorithm.validate()
    }

    /// Number of retrievals the grid fits: datasets × algorithms × trials × k values.
    pub fn expected_retrievals(&self) -> usize {
        self.datasets.len() * self.algorithms.len() * self.trials * (self.k_max - self.k_min + 1)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_size() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.datasets.len(), 8);
        assert_eq!(c.expected_retrievals(), 7920);
    }

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig {
            trials: 3,
            metrics: vec![MetricKind::InfoGuide, MetricKind::Gap],
            output_path: Some("out.jsonl".into()),
            ..Default::default()
        };
        c.datasets.push(DatasetSource::Csv {
            name: "mine".into(),
            path: "data.csv".into(),
            schema: "data.toml".into(),
        });
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn parses_documented_fields() {
        let text = r#"
            trials = 2
            k_max = 4
            gap_B = 5
            algorithms = ["kmeans", "ward"]
            metrics = ["infoguide", "ch"]
            seed = 11

            [[datasets]]
            kind = "artificial"
            id = "b"

            [[datasets]]
            kind = "bundled"
            name = "iris"

            [algorithm]
            restarts = 3
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.gap_b, 5);
        assert_eq!(c.algorithms, vec![Algorithm::KMeans, Algorithm::Ward]);
        assert_eq!(c.datasets[0], DatasetSource::artificial(ArtificialId::B));
        assert_eq!(c.algorithm.restarts, 3);
        assert_eq!(c.algorithm.max_iterations, 300);
        assert_eq!(c.expected_retrievals(), 2 * 2 * 2 * 4);
    }

    #[test]
    fn rejects_invalid() {
        for text in ["k_min = 0", "k_min = 3\nk_max = 3", "trials = 0", "alpha = 0.0", "metrics = []", "gap_b = 1"] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
        assert!(ExperimentConfig::from_toml_str("metrics = [\"dunn\"]").is_err());
    }

    #[test]
    fn sources_load() {
        let b = DatasetSource::artificial(ArtificialId::E).load(RngSeed(1)).unwrap();
        assert_eq!(b.dataset.name(), "e");
        assert_eq!(b.dataset.ground_truth().unwrap().k(), 2);
        let acs = DatasetSource::Bundled {
            name: BundledDataset::AcsCounties,
        }
        .load(RngSeed(1))
        .unwrap();
        assert!(acs.target.is_some());
        let missing = DatasetSource::Csv {
            name: "x".into(),
            path: "/nope.csv".into(),
            schema: "/nope.toml".into(),
        };
        assert!(missing.load(RngSeed(0)).unwrap_err().is_data_error());
    }
}
