//! FPro score and the geometry of the NOVA decision space.
//!
//! FPro is the orthogonal projection of a probability vector onto the edge of
//! the simplex running from "certainly NOVA 1" to "certainly NOVA 4":
//! `(1 - p1 + p4) / 2`.

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::{Matrix4, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::forest::{FeatureMatrix, ForestError, ForestModel};
use crate::nova::NovaProbabilities;

#[derive(Debug, thiserror::Error)]
pub enum FproError {
    #[error("need at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("{ids} ids for {rows} probability rows")]
    Shape { ids: usize, rows: usize },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct FProScore(f64);

impl FProScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn fpro(probs: &NovaProbabilities) -> FProScore {
    let p = probs.as_array();
    // Clamp rounding noise from probabilities that sum to 1 only within tolerance.
    FProScore(((1.0 - p[0] + p[3]) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem {
    pub id: String,
    pub fpro: f64,
    pub probs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReject {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Ranking {
    pub items: Vec<RankedItem>,
    pub rejects: Vec<RankReject>,
}

/// Descending FPro, ties by id ascending.
pub fn sort_ranked(items: &mut [RankedItem]) {
    items.sort_by(|a, b| b.fpro.total_cmp(&a.fpro).then_with(|| a.id.cmp(&b.id)));
}

/// Scores every row of `table`; rows the model cannot score are listed in `rejects`.
pub fn rank_by_fpro(model: &ForestModel, table: &FeatureMatrix) -> Result<Ranking, FproError> {
    model.check_schema(table.schema())?;
    let results: Vec<_> = (0..table.n_rows())
        .into_par_iter()
        .map(|i| (table.ids()[i].clone(), model.predict_proba(table.row(i))))
        .collect();
    let mut ranking = Ranking::default();
    for (id, r) in results {
        match r {
            Ok(p) => ranking.items.push(RankedItem { id, fpro: fpro(&p).value(), probs: *p.as_array() }),
            Err(e) => ranking.rejects.push(RankReject { id, reason: e.to_string() }),
        }
    }
    sort_ranked(&mut ranking.items);
    Ok(ranking)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionSpaceCoords {
    /// `(pc1, pc2)` per input row.
    pub coords: Vec<[f64; 2]>,
    /// Fraction of total variance on each of the two components.
    pub explained_variance: [f64; 2],
    /// Unit loading vectors over `(p1, p2, p3, p4)`.
    pub components: [[f64; 4]; 2],
    pub mean: [f64; 4],
}

/// Sample covariance (n - 1) of the rows and their column means.
pub fn covariance(rows: &[[f64; 4]]) -> ([f64; 4], Matrix4<f64>) {
    let n = rows.len() as f64;
    let mut mean = [0.0; 4];
    for r in rows {
        for j in 0..4 {
            mean[j] += r[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = Matrix4::zeros();
    for r in rows {
        for a in 0..4 {
            for b in 0..4 {
                cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    (mean, cov / (n - 1.0))
}

/// Flips a loading vector so its largest-magnitude entry is positive.
fn orient(v: [f64; 4]) -> [f64; 4] {
    let lead = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if lead < 0.0 {
        v.map(|x| -x)
    } else {
        v
    }
}

pub fn pca_decision_space(rows: &[[f64; 4]]) -> Result<DecisionSpaceCoords, FproError> {
    if rows.len() < 3 {
        return Err(FproError::TooFewRows(rows.len()));
    }
    let (mean, cov) = covariance(rows);
    let total = cov.trace();
    if total <= f64::EPSILON {
        return Err(FproError::ZeroVariance);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(Ordering::Equal));
    let component = |k: usize| {
        let c = eig.eigenvectors.column(order[k]);
        orient([c[0], c[1], c[2], c[3]])
    };
    let components = [component(0), component(1)];
    let explained = [0, 1].map(|k| (eig.eigenvalues[order[k]].max(0.0) / total).clamp(0.0, 1.0));
    let coords = rows
        .iter()
        .map(|r| {
            components.map(|c| (0..4).map(|j| (r[j] - mean[j]) * c[j]).sum())
        })
        .collect();
    Ok(DecisionSpaceCoords { coords, explained_variance: explained, components, mean })
}

/// Writes `id,p1,p2,p3,p4,fpro,pc1,pc2` for external plotting.
pub fn write_plot_data<W: Write>(ids: &[String], probs: &[NovaProbabilities], writer: W) -> Result<(), FproError> {
    if ids.len() != probs.len() {
        return Err(FproError::Shape { ids: ids.len(), rows: probs.len() });
    }
    let rows: Vec<[f64; 4]> = probs.iter().map(|p| *p.as_array()).collect();
    let pca = pca_decision_space(&rows)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "p1", "p2", "p3", "p4", "fpro", "pc1", "pc2"])?;
    for ((id, p), c) in ids.iter().zip(probs).zip(&pca.coords) {
        let a = p.as_array();
        let mut rec = vec![id.clone()];
        rec.extend(a.iter().map(|v| v.to_string()));
        rec.push(fpro(p).value().to_string());
        rec.push(c[0].to_string());
        rec.push(c[1].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
