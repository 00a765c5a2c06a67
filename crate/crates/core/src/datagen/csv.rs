use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Column layout of a CSV file. Without a header row, columns are addressed
/// by their zero-based position written as a string (`"0"`, `"1"`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    /// Response variable for regression-based evaluation.
    #[serde(default)]
    pub target_column: Option<String>,
    /// Base predictors of the regression; cluster indicators are added on top.
    #[serde(default)]
    pub predictor_columns: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_has_header")]
    pub has_header: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_has_header() -> bool {
    true
}

impl CsvSchema {
    pub fn new(feature_columns: Vec<String>) -> Self {
        CsvSchema {
            feature_columns,
            label_column: None,
            target_column: None,
            predictor_columns: Vec::new(),
            delimiter: default_delimiter(),
            has_header: default_has_header(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: CsvSchema = toml::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::SchemaMismatch("no feature columns".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::SchemaMismatch(format!("delimiter {:?} is not ASCII", self.delimiter)));
        }
        let extra = self
            .label_column
            .iter()
            .chain(&self.target_column)
            .chain(&self.predictor_columns);
        for name in extra {
            if self.feature_columns.contains(name) {
                return Err(Error::SchemaMismatch(format!("`{name}` is both a feature and a non-feature column")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    /// Feature columns, with labels attached when the schema names one.
    pub dataset: Dataset,
    pub target: Option<Vec<f64>>,
    pub predictors: Option<Dataset>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => e.into(),
    })?;
    let name = path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    read_csv(file, name, schema)
}

/// Parses CSV text. Data rows are numbered from 1 in errors, header excluded.
pub fn read_csv<R: Read>(reader: R, name: impl Into<String>, schema: &CsvSchema) -> Result<LoadedCsv> {
    schema.validate()?;
    let mut rdr = ::csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header: Vec<String> = if schema.has_header {
        match records.next() {
            Some(rec) => rec
                .map_err(csv_error)?
                .iter()
                .map(|s| s.trim().to_string())
                .collect(),
            None => return Err(Error::SchemaMismatch("file is empty".into())),
        }
    } else {
        Vec::new()
    };
    let position = |column: &str| -> Result<usize> {
        if schema.has_header {
            header.iter().position(|h| h == column)
        } else {
            column.parse().ok()
        }
        .ok_or_else(|| Error::SchemaMismatch(format!("column `{column}` not found")))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<Vec<_>>>()?;
    let predictor_idx = schema
        .predictor_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = schema.label_column.as_deref().map(&position).transpose()?;
    let target_idx = schema.target_column.as_deref().map(&position).transpose()?;

    let mut features = Vec::new();
    let mut predictors = Vec::new();
    let mut target = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (row0, rec) in records.enumerate() {
        let row = row0 + 1;
        let rec = rec.map_err(csv_error)?;
        let cell = |idx: usize, column: &str| -> Result<&str> {
            rec.get(idx).map(str::trim).ok_or_else(|| Error::ParseError {
                row,
                column: column.to_string(),
                message: "missing cell".into(),
            })
        };
        let number = |idx: usize, column: &str| -> Result<f64> {
            let text = cell(idx, column)?;
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::ParseError {
                    row,
                    column: column.to_string(),
                    message: format!("`{text}` is not a finite number"),
                }),
            }
        };
        for (&idx, column) in feature_idx.iter().zip(&schema.feature_columns) {
            features.push(number(idx, column)?);
        }
        for (&idx, column) in predictor_idx.iter().zip(&schema.predictor_columns) {
            predictors.push(number(idx, column)?);
        }
        if let (Some(idx), Some(column)) = (target_idx, &schema.target_column) {
            target.push(number(idx, column)?);
        }
        if let (Some(idx), Some(column)) = (label_idx, &schema.label_column) {
            let text = cell(idx, column)?;
            let next = label_ids.len();
            labels.push(*label_ids.entry(text.to_string()).or_insert(next));
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::SchemaMismatch("no data rows".into()));
    }

    let name = name.into();
    let mut dataset = Dataset::from_flat(
        name.clone(),
        n,
        schema.feature_columns.len(),
        features,
        schema.feature_columns.clone(),
    )?;
    if label_idx.is_some() {
        dataset = dataset.with_labels(labels)?;
    }
    let predictors = if schema.predictor_columns.is_empty() {
        None
    } else {
        Some(Dataset::from_flat(
            format!("{name}-predictors"),
            n,
            schema.predictor_columns.len(),
            predictors,
            schema.predictor_columns.clone(),
        )?)
    };
    Ok(LoadedCsv {
        dataset,
        target: target_idx.map(|_| target),
        predictors,
    })
}

fn csv_error(e: ::csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.record() as usize);
    Error::ParseError {
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Writes features (and a trailing `label` column when labels exist) with a
/// header row. Values use the shortest representation that round-trips.
pub fn write_csv_to<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(writer);
    let io = |e: ::csv::Error| Error::Io(e.to_string());
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    if dataset.labels().is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(io)?;
    for (i, row) in dataset.rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = dataset.labels() {
            fields.push(labels[i].to_string());
        }
        w.write_record(&fields).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    write_csv_to(File::create(path)?, dataset)
}
