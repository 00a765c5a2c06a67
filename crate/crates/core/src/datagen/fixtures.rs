use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::csv::{read_csv, CsvSchema, LoadedCsv};
use crate::error::{Error, Result};

/// Datasets compiled into the library. See `fixtures/README.md` for sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundledDataset {
    Iris,
    Wine,
    WineQuality,
    /// County-level table with no ground truth; a regression target instead.
    AcsCounties,
}

impl BundledDataset {
    pub const ALL: [BundledDataset; 4] = [
        BundledDataset::Iris,
        BundledDataset::Wine,
        BundledDataset::WineQuality,
        BundledDataset::AcsCounties,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BundledDataset::Iris => "iris",
            BundledDataset::Wine => "wine",
            BundledDataset::WineQuality => "wine_quality",
            BundledDataset::AcsCounties => "acs_counties",
        }
    }

    pub fn csv_text(self) -> &'static str {
        match self {
            BundledDataset::Iris => include_str!("../../fixtures/iris.csv"),
            BundledDataset::Wine => include_str!("../../fixtures/wine.csv"),
            BundledDataset::WineQuality => include_str!("../../fixtures/wine_quality.csv"),
            BundledDataset::AcsCounties => include_str!("../../fixtures/acs_counties.csv"),
        }
    }

    pub fn schema_text(self) -> &'static str {
        match self {
            BundledDataset::Iris => include_str!("../../fixtures/iris.toml"),
            BundledDataset::Wine => include_str!("../../fixtures/wine.toml"),
            BundledDataset::WineQuality => include_str!("../../fixtures/wine_quality.toml"),
            BundledDataset::AcsCounties => include_str!("../../fixtures/acs_counties.toml"),
        }
    }

    pub fn schema(self) -> CsvSchema {
        CsvSchema::from_toml_str(self.schema_text()).expect("bundled schema is valid")
    }
}

impl fmt::Display for BundledDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BundledDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BundledDataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown bundled dataset `{s}`")))
    }
}

pub fn load_bundled(which: BundledDataset) -> Result<LoadedCsv> {
    read_csv(which.csv_text().as_bytes(), which.name(), &which.schema())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let expect = [
            (BundledDataset::Iris, 150, 4, Some(3)),
            (BundledDataset::Wine, 178, 13, Some(3)),
            (BundledDataset::WineQuality, 1599, 11, Some(6)),
            (BundledDataset::AcsCounties, 3142, 21, None),
        ];
        for (which, n, f, k) in expect {
            let loaded = load_bundled(which).unwrap();
            assert_eq!(loaded.dataset.n_points(), n, "{which}");
            assert_eq!(loaded.dataset.n_features(), f, "{which}");
            assert_eq!(loaded.dataset.ground_truth().map(|p| p.k()), k, "{which}");
        }
    }

    #[test]
    fn acs_has_target_and_predictors() {
        let acs = load_bundled(BundledDataset::AcsCounties).unwrap();
        assert_eq!(acs.target.unwrap().len(), 3142);
        let p = acs.predictors.unwrap();
        assert_eq!(p.feature_names(), &["population", "diabetes", "obesity", "pct_age_65_plus"]);
    }

    #[test]
    fn names_parse_back() {
        for d in BundledDataset::ALL {
            assert_eq!(d.name().parse::<BundledDataset>().unwrap(), d);
        }
    }
}
