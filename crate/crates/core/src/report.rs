//! Comparison tables and per-category FPro distributions.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::eval::EvalReport;
use crate::nova::NovaClass;

/// Categories need at least this many items to be summarised by default.
pub const DEFAULT_MIN_N: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report `{model}` has classes {found:?}, expected {expected:?}")]
    ClassMismatch { model: String, expected: Vec<u8>, found: Vec<u8> },
    #[error("malformed metrics table: {0}")]
    Malformed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: String,
    pub n: usize,
    pub min: f64,
    pub lower_quartile: f64,
    pub median: f64,
    pub upper_quartile: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryReport {
    pub min_n: usize,
    pub summaries: Vec<CategorySummary>,
    pub warnings: Vec<String>,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number FPro summary for each category with at least `min_n` items,
/// ordered by median and then by name.
pub fn category_fpro_summary<'a, I>(scored: I, min_n: usize) -> CategoryReport
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (category, score) in scored {
        groups.entry(category).or_default().push(score);
    }
    let mut summaries: Vec<CategorySummary> = groups
        .into_iter()
        .filter(|(_, v)| v.len() >= min_n.max(1))
        .map(|(category, mut v)| {
            v.sort_by(f64::total_cmp);
            CategorySummary {
                category: category.to_string(),
                n: v.len(),
                min: v[0],
                lower_quartile: quantile_sorted(&v, 0.25),
                median: quantile_sorted(&v, 0.5),
                upper_quartile: quantile_sorted(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect();
    summaries.sort_by(|a, b| a.median.total_cmp(&b.median).then_with(|| a.category.cmp(&b.category)));
    let mut warnings = Vec::new();
    if summaries.is_empty() {
        warnings.push(format!("no category has at least {min_n} items"));
    }
    CategoryReport { min_n, summaries, warnings }
}

pub fn write_category_csv<W: Write>(summaries: &[CategorySummary], writer: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["category", "n", "min", "lower_quartile", "median", "upper_quartile", "max"])?;
    for s in summaries {
        let f = |v: f64| format!("{v:.4}");
        w.write_record([
            s.category.clone(),
            s.n.to_string(),
            f(s.min),
            f(s.lower_quartile),
            f(s.median),
            f(s.upper_quartile),
            f(s.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellValue {
    pub auc_mean: f64,
    pub auc_std: f64,
    pub aup_mean: f64,
    pub aup_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub features: String,
    /// One entry per class, in `MetricsTable::classes` order.
    pub values: Vec<CellValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub classes: Vec<NovaClass>,
    pub rows: Vec<MetricsRow>,
}

/// One row per report, in the given order.
pub fn metrics_table(reports: &[EvalReport]) -> Result<MetricsTable, ReportError> {
    let classes = reports.first().map(|r| r.class_set()).unwrap_or_else(|| NovaClass::ALL.to_vec());
    let mut rows = Vec::with_capacity(reports.len());
    for r in reports {
        if r.class_set() != classes {
            return Err(ReportError::ClassMismatch {
                model: r.model.clone(),
                expected: classes.iter().map(|c| c.get()).collect(),
                found: r.class_set().iter().map(|c| c.get()).collect(),
            });
        }
        let values = r
            .per_class
            .iter()
            .map(|c| CellValue { auc_mean: c.auc.mean, auc_std: c.auc.std, aup_mean: c.aup.mean, aup_std: c.aup.std })
            .collect();
        rows.push(MetricsRow { model: r.model.clone(), features: r.feature_spec.clone(), values });
    }
    Ok(MetricsTable { classes, rows })
}

const METRIC_SUFFIXES: [&str; 4] = ["auc_mean", "auc_std", "aup_mean", "aup_std"];

impl MetricsTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["model".to_string(), "features".to_string()];
        for c in &self.classes {
            h.extend(METRIC_SUFFIXES.iter().map(|m| format!("nova{c}_{m}")));
        }
        h
    }

    /// Values with four decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut rec = vec![row.model.clone(), row.features.clone()];
            for v in &row.values {
                rec.extend([v.auc_mean, v.auc_std, v.aup_mean, v.aup_std].map(|x| format!("{x:.4}")));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ReportError> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || !(header.len() - 2).is_multiple_of(4) {
            return Err(ReportError::Malformed(format!("{} columns", header.len())));
        }
        let classes = header[2..]
            .chunks(4)
            .map(|c| {
                c[0].strip_prefix("nova")
                    .and_then(|s| s.strip_suffix("_auc_mean"))
                    .and_then(|s| s.parse::<u8>().ok())
                    .and_then(|n| NovaClass::new(n).ok())
                    .ok_or_else(|| ReportError::Malformed(format!("column `{}`", c[0])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| {
                rec[i].parse::<f64>().map_err(|_| ReportError::Malformed(format!("value `{}`", &rec[i])))
            };
            let mut values = Vec::new();
            for k in 0..classes.len() {
                let b = 2 + 4 * k;
                values.push(CellValue { auc_mean: num(b)?, auc_std: num(b + 1)?, aup_mean: num(b + 2)?, aup_std: num(b + 3)? });
            }
            rows.push(MetricsRow { model: rec[0].to_string(), features: rec[1].to_string(), values });
        }
        Ok(MetricsTable { classes, rows })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), ReportError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}
