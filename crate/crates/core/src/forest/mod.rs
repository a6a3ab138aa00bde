//! Deterministic multi-class random forest over NOVA classes.
//!
//! Each tree is grown on a bootstrap sample drawn from a generator seeded with
//! `seed ^ tree_index`, after the training rows have been put in canonical
//! order by id. Trees are trained in parallel but their content only depends
//! on `(data, params)`, so any thread count yields the same model.
//!
//! Splits minimise weighted Gini impurity over `features_per_split` features
//! sampled without replacement at each node. Thresholds sit halfway between
//! consecutive distinct values; ties go to the lowest feature index, then the
//! lowest threshold. Missing values are replaced by the training median of
//! their feature, both at training and at prediction time.

mod matrix;
mod tree;

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use matrix::{FeatureColumn, FeatureMatrix};
pub use tree::{Node, Tree};

pub use crate::nova::{NovaClass, NovaProbabilities};

/// Version written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ForestError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("training matrix is empty")]
    EmptyMatrix,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("feature schema mismatch at `{feature}`")]
    SchemaMismatch { feature: String },
    #[error("cannot read model: {0}")]
    Load(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means ⌈√d⌉.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: None, min_samples_leaf: 1, features_per_split: None, seed: 42 }
    }
}

impl ForestParams {
    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .max(1)
    }

    pub fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        let bad = |m: String| Err(ForestError::InvalidParams(m));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be at least 1".into());
        }
        if let Some(k) = self.features_per_split {
            if k == 0 || k > n_features {
                return bad(format!("features_per_split must be in 1..={n_features}, got {k}"));
            }
        }
        Ok(())
    }

    /// Grid over `n_trees ∈ {100, 300}`, `max_depth ∈ {10, 20, ∞}`, `min_samples_leaf ∈ {1, 5}`.
    pub fn default_grid(seed: u64) -> Vec<ForestParams> {
        let mut grid = Vec::new();
        for n_trees in [100, 300] {
            for max_depth in [Some(10), Some(20), None] {
                for min_samples_leaf in [1, 5] {
                    grid.push(ForestParams { n_trees, max_depth, min_samples_leaf, features_per_split: None, seed });
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub params: ForestParams,
    pub schema: Vec<FeatureColumn>,
    /// Per-feature training medians used for imputation.
    pub medians: Vec<f64>,
    /// Classes in probability order.
    pub classes: Vec<NovaClass>,
    /// All training labels were the same class.
    pub degenerate: bool,
    pub trees: Vec<Tree>,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        values[m - 1] + (values[m] - values[m - 1]) / 2.0
    }
}

/// Positions sorted by id, ties by original position.
fn canonical_order(ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]).then(a.cmp(&b)));
    order
}

pub fn train(features: &FeatureMatrix, labels: &[NovaClass], params: &ForestParams) -> Result<ForestModel, ForestError> {
    let d = features.n_features();
    params.validate(d)?;
    if features.is_empty() || d == 0 {
        return Err(ForestError::EmptyMatrix);
    }
    if labels.len() != features.n_rows() {
        return Err(ForestError::Shape(format!("{} labels for {} rows", labels.len(), features.n_rows())));
    }
    if features.n_rows() < 2 * params.min_samples_leaf {
        return Err(ForestError::InvalidParams(format!(
            "{} rows cannot satisfy min_samples_leaf = {}",
            features.n_rows(),
            params.min_samples_leaf
        )));
    }

    let order = canonical_order(features.ids());
    let n = order.len();
    let medians: Vec<f64> = (0..d)
        .map(|f| {
            let mut present: Vec<f64> = order.iter().filter_map(|&i| features.row(i)[f]).collect();
            median(&mut present)
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|f| order.iter().map(|&i| features.row(i)[f].unwrap_or(medians[f])).collect())
        .collect();
    let y: Vec<u8> = order.iter().map(|&i| labels[i].index() as u8).collect();
    let degenerate = y.iter().all(|&c| c == y[0]);

    let grow = tree::GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: params.resolved_features_per_split(d),
    };
    let data = tree::Columns { columns: &columns, labels: &y };
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ t as u64);
            let sample = tree::bootstrap(n, &mut rng);
            tree::grow(&data, sample, &grow, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        params: *params,
        schema: features.schema().to_vec(),
        medians,
        classes: NovaClass::ALL.to_vec(),
        degenerate,
        trees,
    })
}

impl ForestModel {
    fn impute(&self, row: &[Option<f64>]) -> Result<Vec<f64>, ForestError> {
        if row.len() != self.schema.len() {
            let idx = row.len().min(self.schema.len());
            let feature = self
                .schema
                .get(idx)
                .map(|c| c.name.clone())
                .unwrap_or_else(|| format!("<extra column {idx}>"));
            return Err(ForestError::SchemaMismatch { feature });
        }
        Ok(row
            .iter()
            .zip(&self.medians)
            .map(|(v, m)| v.filter(|x| !x.is_nan()).unwrap_or(*m))
            .collect())
    }

    /// Mean over trees of the reached leaf's class frequencies.
    pub fn predict_proba(&self, row: &[Option<f64>]) -> Result<NovaProbabilities, ForestError> {
        let x = self.impute(row)?;
        let mut acc = [0.0f64; 4];
        for tree in &self.trees {
            let counts = tree.leaf(&x);
            let total: f64 = counts.iter().map(|&c| f64::from(c)).sum();
            for (a, &c) in acc.iter_mut().zip(counts) {
                *a += f64::from(c) / total;
            }
        }
        Ok(NovaProbabilities::from_counts(acc).expect("every leaf has samples"))
    }

    pub fn predict_class(&self, row: &[Option<f64>]) -> Result<NovaClass, ForestError> {
        Ok(self.predict_proba(row)?.predict_class())
    }

    /// Checks column names and units against the training schema.
    pub fn check_schema(&self, schema: &[FeatureColumn]) -> Result<(), ForestError> {
        for i in 0..self.schema.len().max(schema.len()) {
            match (self.schema.get(i), schema.get(i)) {
                (Some(a), Some(b)) if a == b => {}
                (Some(a), _) => return Err(ForestError::SchemaMismatch { feature: a.name.clone() }),
                (None, Some(b)) => return Err(ForestError::SchemaMismatch { feature: b.name.clone() }),
                (None, None) => unreachable!(),
            }
        }
        Ok(())
    }

    pub fn predict_matrix(&self, features: &FeatureMatrix) -> Result<Vec<NovaProbabilities>, ForestError> {
        self.check_schema(features.schema())?;
        (0..features.n_rows())
            .into_par_iter()
            .map(|i| self.predict_proba(features.row(i)))
            .collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("model serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ForestError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_slice(bytes).map_err(|e| ForestError::Load(e.to_string()))?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(ForestError::Version { found: probe.format_version, expected: MODEL_FORMAT_VERSION });
        }
        let model: ForestModel = serde_json::from_slice(bytes).map_err(|e| ForestError::Load(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), ForestError> {
        let d = self.schema.len();
        if self.medians.len() != d {
            return Err(ForestError::Load(format!("{} medians for {d} features", self.medians.len())));
        }
        if self.trees.is_empty() {
            return Err(ForestError::Load("model has no trees".into()));
        }
        if self.classes != NovaClass::ALL {
            return Err(ForestError::Load("unexpected class set".into()));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.check(d).map_err(|e| ForestError::Load(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }
}

pub fn save_model(model: &ForestModel, path: &Path) -> Result<(), ForestError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&model.to_json())?;
    file.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ForestModel, ForestError> {
    let bytes = std::fs::read(path)?;
    ForestModel::from_json(&bytes)
}
