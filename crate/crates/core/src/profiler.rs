//! Log-space nutrient statistics, z-score profiles and profile comparison.
//!
//! Concentrations across foods are roughly symmetric in log10 space, so each
//! nutrient is summarised by the mean and sample standard deviation of log10
//! of its strictly positive values. Zeros are excluded, not pseudocounted.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ingest::NutrientPanel;
use crate::nutrient::Nutrient;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot fit statistics on an empty table")]
    EmptyTable,
    #[error("both panels have no positive nutrient values")]
    NothingToCompare,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogStats {
    /// Mean of log10 concentration.
    pub mu: f64,
    /// Sample (n − 1) standard deviation of log10 concentration.
    pub sigma: f64,
    /// Number of strictly positive concentrations.
    pub n_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientStats {
    pub stats: BTreeMap<Nutrient, LogStats>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl NutrientStats {
    pub fn get(&self, nutrient: Nutrient) -> Option<&LogStats> {
        self.stats.get(&nutrient)
    }
}

/// Mean and sample standard deviation; values are sorted first so the result
/// does not depend on input order.
fn mean_std(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn fit_stats<'a, I>(panels: I) -> Result<NutrientStats, ProfileError>
where
    I: IntoIterator<Item = &'a NutrientPanel>,
{
    let mut logs: [Vec<f64>; 11] = Default::default();
    let mut rows = 0usize;
    for panel in panels {
        rows += 1;
        for (n, v) in panel.iter() {
            if let Some(v) = v.filter(|&v| v > 0.0) {
                logs[n.index()].push(v.log10());
            }
        }
    }
    if rows == 0 {
        return Err(ProfileError::EmptyTable);
    }
    let mut out = NutrientStats::default();
    for n in Nutrient::ALL {
        let values = &mut logs[n.index()];
        if values.len() < 2 {
            out.warnings.push(format!("{n}: only {} positive samples, statistics omitted", values.len()));
            continue;
        }
        let (mu, sigma) = mean_std(values);
        out.stats.insert(n, LogStats { mu, sigma, n_samples: values.len() });
    }
    Ok(out)
}

/// Per-nutrient log-space z-scores; `None` where not applicable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ZProfile {
    pub values: [Option<f64>; 11],
}

impl ZProfile {
    pub fn get(&self, nutrient: Nutrient) -> Option<f64> {
        self.values[nutrient.index()]
    }
}

pub fn zscore_value(concentration: f64, stats: &LogStats) -> Option<f64> {
    (concentration > 0.0 && stats.sigma > 0.0).then(|| (concentration.log10() - stats.mu) / stats.sigma)
}

pub fn zscore(panel: &NutrientPanel, stats: &NutrientStats) -> ZProfile {
    let mut out = ZProfile::default();
    for (n, v) in panel.iter() {
        out.values[n.index()] = v.zip(stats.get(n)).and_then(|(c, s)| zscore_value(c, s));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileComparison {
    /// Share of compared nutrients whose concentration changed by more than 10%.
    pub frac_changed_10pct: f64,
    /// Share of compared nutrients that changed at least tenfold in either direction.
    pub frac_changed_10x: f64,
    /// `b / a` per compared nutrient; `None` when `a` is zero.
    pub ratios: BTreeMap<Nutrient, Option<f64>>,
}

/// Compares two panels nutrient by nutrient. Missing values count as zero; a
/// nutrient is compared when it is positive in at least one panel.
pub fn compare_profiles(a: &NutrientPanel, b: &NutrientPanel) -> Result<ProfileComparison, ProfileError> {
    let mut ratios = BTreeMap::new();
    let mut changed_10pct = 0usize;
    let mut changed_10x = 0usize;
    for n in Nutrient::ALL {
        let x = a.get(n).unwrap_or(0.0);
        let y = b.get(n).unwrap_or(0.0);
        if x <= 0.0 && y <= 0.0 {
            continue;
        }
        if x <= 0.0 || y <= 0.0 {
            ratios.insert(n, (x > 0.0).then_some(0.0));
            changed_10pct += 1;
            changed_10x += 1;
            continue;
        }
        let r = y / x;
        ratios.insert(n, Some(r));
        if (r - 1.0).abs() > 0.10 {
            changed_10pct += 1;
        }
        if r.max(1.0 / r) > 10.0 {
            changed_10x += 1;
        }
    }
    if ratios.is_empty() {
        return Err(ProfileError::NothingToCompare);
    }
    let total = ratios.len() as f64;
    Ok(ProfileComparison {
        frac_changed_10pct: changed_10pct as f64 / total,
        frac_changed_10x: changed_10x as f64 / total,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    /// Inclusive lower edge, g/100 g.
    pub lower: f64,
    /// Exclusive upper edge, g/100 g.
    pub upper: f64,
    pub count: usize,
    /// Probability density per unit log10 concentration.
    pub density: f64,
}

/// Log-binned histogram of the positive values of one nutrient, with
/// `bins_per_decade` equal-width bins in log10 space aligned to whole decades.
pub fn log_histogram<'a, I>(panels: I, nutrient: Nutrient, bins_per_decade: usize) -> Vec<HistogramBin>
where
    I: IntoIterator<Item = &'a NutrientPanel>,
{
    let logs: Vec<f64> = panels
        .into_iter()
        .filter_map(|p| p.get(nutrient))
        .filter(|&v| v > 0.0)
        .map(f64::log10)
        .collect();
    if logs.is_empty() || bins_per_decade == 0 {
        return Vec::new();
    }
    let width = 1.0 / bins_per_decade as f64;
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_bins = (((hi - lo) / width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; n_bins];
    for v in &logs {
        let idx = (((v - lo) / width).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let total = logs.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let l = lo + i as f64 * width;
            HistogramBin {
                lower: 10f64.powf(l),
                upper: 10f64.powf(l + width),
                count,
                density: count as f64 / (total * width),
            }
        })
        .collect()
}

/// Writes `nutrient,lower_g,upper_g,count,density` rows for every nutrient.
pub fn write_histograms<W: Write>(
    panels: &[&NutrientPanel],
    bins_per_decade: usize,
    writer: W,
) -> Result<(), ProfileError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| ProfileError::Csv(e.to_string());
    w.write_record(["nutrient", "lower_g", "upper_g", "count", "density"]).map_err(err)?;
    for n in Nutrient::ALL {
        for bin in log_histogram(panels.iter().copied(), n, bins_per_decade) {
            w.write_record([
                n.key().to_string(),
                format!("{:.6e}", bin.lower),
                format!("{:.6e}", bin.upper),
                bin.count.to_string(),
                format!("{:.6}", bin.density),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| ProfileError::Csv(e.to_string()))?;
    Ok(())
}
