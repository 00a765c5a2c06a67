use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::ExperimentRecord;
use crate::error::{Error, Result};
use crate::stats::{wilson_interval, WilsonInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupDim {
    DatasetType,
    Dataset,
    Algorithm,
    Metric,
}

impl GroupDim {
    pub fn name(self) -> &'static str {
        match self {
            GroupDim::DatasetType => "dataset_type",
            GroupDim::Dataset => "dataset",
            GroupDim::Algorithm => "algorithm",
            GroupDim::Metric => "metric",
        }
    }

    fn key(self, r: &ExperimentRecord) -> String {
        match self {
            GroupDim::DatasetType => r.dataset_type.name().to_string(),
            GroupDim::Dataset => r.dataset.clone(),
            GroupDim::Algorithm => r.algorithm.name().to_string(),
            GroupDim::Metric => r.metric.name().to_string(),
        }
    }

    /// Parses a comma-separated list such as `metric,dataset_type`.
    pub fn parse_list(s: &str) -> Result<Vec<GroupDim>> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for GroupDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [GroupDim::DatasetType, GroupDim::Dataset, GroupDim::Algorithm, GroupDim::Metric]
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown grouping dimension `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub sd: f64,
}

impl MeanSd {
    /// Sorts before summing so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let sd = if n > 1 {
            (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanSd { n, mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `(dimension, value)` in the requested grouping order.
    pub group: Vec<(GroupDim, String)>,
    pub records: usize,
    pub errors: usize,
    /// Records with a ground truth and a selected k.
    pub with_truth: usize,
    pub hits: usize,
    pub prob_true_k: Option<WilsonInterval>,
    pub nmi: Option<MeanSd>,
    pub r2_adj_out: Option<MeanSd>,
    /// `r2_adj_out − r2_adj_out_base` per record.
    pub r2_gain: Option<MeanSd>,
}

/// Summaries per group. An empty `group_by` yields one overall row.
pub fn aggregate(records: &[ExperimentRecord], group_by: &[GroupDim], confidence: f64) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut groups: BTreeMap<Vec<String>, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(group_by.iter().map(|d| d.key(r)).collect())
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(key, rs)| {
            let ok: Vec<&&ExperimentRecord> = rs.iter().filter(|r| !r.is_error()).collect();
            let (selected, k_stars): (Vec<usize>, Vec<usize>) =
                ok.iter().filter_map(|r| Some((r.k_hat?, r.k_star?))).unzip();
            // each record is scored against its own k*
            let hits = selected.iter().zip(&k_stars).filter(|(a, b)| a == b).count();
            let prob = if selected.is_empty() {
                None
            } else {
                Some(wilson_interval(hits, selected.len(), confidence)?)
            };
            let nmi: Vec<f64> = ok.iter().filter_map(|r| r.nmi).collect();
            let r2: Vec<f64> = ok.iter().filter_map(|r| r.r2_adj_out).collect();
            let gain: Vec<f64> = ok
                .iter()
                .filter_map(|r| Some(r.r2_adj_out? - r.r2_adj_out_base?))
                .collect();
            Ok(SummaryRow {
                group: group_by.iter().copied().zip(key).collect(),
                records: rs.len(),
                errors: rs.len() - ok.len(),
                with_truth: selected.len(),
                hits,
                prob_true_k: prob,
                nmi: MeanSd::of(&nmi),
                r2_adj_out: MeanSd::of(&r2),
                r2_gain: MeanSd::of(&gain),
            })
        })
        .collect()
}

/// One CSV row per group; missing statistics are empty cells.
pub fn write_summary_csv<W: Write>(writer: W, group_by: &[GroupDim], rows: &[SummaryRow]) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(writer);
    let io = |e: ::csv::Error| Error::Io(e.to_string());
    let mut header: Vec<String> = group_by.iter().map(|d| d.name().to_string()).collect();
    header.extend(
        [
            "records", "errors", "with_truth", "hits", "p_true_k", "p_true_k_lower", "p_true_k_upper", "nmi_n",
            "nmi_mean", "nmi_sd", "r2_n", "r2_adj_out_mean", "r2_adj_out_sd", "r2_gain_mean", "r2_gain_sd",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(io)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for row in rows {
        let mut fields: Vec<String> = row.group.iter().map(|(_, v)| v.clone()).collect();
        fields.extend([
            row.records.to_string(),
            row.errors.to_string(),
            row.with_truth.to_string(),
            row.hits.to_string(),
            opt(row.prob_true_k.map(|w| w.point)),
            opt(row.prob_true_k.map(|w| w.lower)),
            opt(row.prob_true_k.map(|w| w.upper)),
            row.nmi.map_or(0, |m| m.n).to_string(),
            opt(row.nmi.map(|m| m.mean)),
            opt(row.nmi.map(|m| m.sd)),
            row.r2_adj_out.map_or(0, |m| m.n).to_string(),
            opt(row.r2_adj_out.map(|m| m.mean)),
            opt(row.r2_adj_out.map(|m| m.sd)),
            opt(row.r2_gain.map(|m| m.mean)),
            opt(row.r2_gain.map(|m| m.sd)),
        ]);
        w.write_record(&fields).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Algorithm;
    use crate::harness::config::{DatasetType, MetricKind};
    use crate::harness::record::RecordError;
    use crate::seed::RngSeed;
    use crate::evaluation::prob_true_k;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn rec(dataset: &str, metric: MetricKind, trial: usize, k_hat: usize, nmi: f64) -> ExperimentRecord {
        ExperimentRecord {
            dataset: dataset.into(),
            dataset_type: DatasetType::Artificial,
            algorithm: Algorithm::Gmm,
            trial,
            metric,
            k_hat: Some(k_hat),
            k_star: Some(3),
            nmi: Some(nmi),
            r2_adj_out: None,
            r2_adj_out_base: None,
            retrievals: 11,
            wall_time_ms: 1,
            seed_used: RngSeed(0),
            error: None,
        }
    }

    #[test]
    fn twenty_one_of_thirty() {
        let records: Vec<_> = (0..30)
            .map(|t| rec("b", MetricKind::InfoGuide, t, if t < 21 { 3 } else { 4 }, 0.9))
            .collect();
        let rows = aggregate(&records, &[GroupDim::Metric], 0.95).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].hits, 21);
        let ks: Vec<usize> = records.iter().map(|r| r.k_hat.unwrap()).collect();
        assert_eq!(rows[0].prob_true_k.unwrap(), prob_true_k(&ks, 3, 0.95).unwrap());
    }

    #[test]
    fn single_record_sd_zero() {
        let rows = aggregate(&[rec("b", MetricKind::Ch, 0, 3, 0.7)], &[GroupDim::Dataset], 0.95).unwrap();
        let nmi = rows[0].nmi.unwrap();
        assert_eq!((nmi.n, nmi.mean, nmi.sd), (1, 0.7, 0.0));
    }

    #[test]
    fn grouping_by_metric_spans_datasets() {
        let mut records = Vec::new();
        for (i, m) in MetricKind::ALL.into_iter().enumerate() {
            for d in ["b", "iris"] {
                records.push(rec(d, m, 0, 3, i as f64 / 4.0));
            }
        }
        let rows = aggregate(&records, &[GroupDim::Metric], 0.95).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.records == 2));
        let rows = aggregate(&records, &[GroupDim::Metric, GroupDim::Dataset], 0.95).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(aggregate(&records, &[], 0.95).unwrap().len(), 1);
    }

    #[test]
    fn errors_counted_not_scored() {
        let mut bad = rec("b", MetricKind::Gap, 1, 3, 0.0);
        bad.error = Some(RecordError {
            operation: "select".into(),
            code: "x".into(),
            message: String::new(),
        });
        let rows = aggregate(&[rec("b", MetricKind::Gap, 0, 3, 1.0), bad], &[], 0.95).unwrap();
        assert_eq!((rows[0].records, rows[0].errors, rows[0].with_truth), (2, 1, 1));
        assert_eq!(rows[0].nmi.unwrap().mean, 1.0);
    }

    #[test]
    fn regression_gain() {
        let mut r = rec("acs", MetricKind::InfoGuide, 0, 5, 0.0);
        r.k_star = None;
        r.nmi = None;
        r.dataset_type = DatasetType::RealWorld;
        r.r2_adj_out = Some(0.45);
        r.r2_adj_out_base = Some(0.40);
        let rows = aggregate(&[r], &[GroupDim::DatasetType], 0.95).unwrap();
        assert!(rows[0].prob_true_k.is_none());
        assert!((rows[0].r2_gain.unwrap().mean - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_input_and_csv() {
        assert_eq!(aggregate(&[], &[], 0.95), Err(Error::EmptyRecords));
        let rows = aggregate(&[rec("b", MetricKind::Ch, 0, 3, 0.5)], &[GroupDim::Metric], 0.95).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &[GroupDim::Metric], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("metric,records,errors"));
        assert!(lines.next().unwrap().starts_with("ch,1,0,1,1,"));
        assert_eq!(GroupDim::parse_list("metric, dataset_type").unwrap(), vec![GroupDim::Metric, GroupDim::DatasetType]);
        assert!(GroupDim::parse_list("colour").is_err());
    }

    proptest! {
        #[test]
        fn order_independent(seed in 0u64..500, n in 1usize..40) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let records: Vec<_> = (0..n)
                .map(|t| rec(if t % 3 == 0 { "b" } else { "c" }, MetricKind::ALL[t % 4], t, 2 + t % 3, (t as f64).sin().abs()))
                .collect();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rng);
            let dims = [GroupDim::Dataset, GroupDim::Metric];
            prop_assert_eq!(aggregate(&records, &dims, 0.95).unwrap(), aggregate(&shuffled, &dims, 0.95).unwrap());
        }
    }
}
