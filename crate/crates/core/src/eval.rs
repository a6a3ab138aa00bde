//! Evaluation protocol: a stratified tuning holdout, five stratified test
//! folds over the remaining rows, a grid search on the holdout, and exact
//! one-vs-rest ROC-AUC and average precision per class.

use std::fmt::Debug;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forest::{self, FeatureMatrix, ForestModel, ForestParams};
use crate::nova::{NovaClass, NovaProbabilities};

pub const N_FOLDS: usize = 5;
/// Minimum members per class so every cell receives at least one.
pub const MIN_CLASS_SIZE: usize = 10;
/// Cell weights in 25ths: tuning 20 %, each fold 16 %.
const CELL_WEIGHTS: [usize; N_FOLDS + 1] = [5, 4, 4, 4, 4, 4];
const WEIGHT_DENOM: usize = 25;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("NOVA class {class} has {count} rows; at least {MIN_CLASS_SIZE} are needed")]
    ClassTooSmall { class: u8, count: usize },
    #[error("metric needs at least one positive and one negative")]
    SingleClass,
    #[error("metric needs at least one positive")]
    NoPositives,
    #[error("{scores} scores for {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("grid point {index}: {message}")]
    InvalidGridPoint { index: usize, message: String },
    #[error("every grid point failed; first error: {0}")]
    AllFailed(String),
    #[error("split plan covers {plan} rows but the data has {data}")]
    PlanMismatch { plan: usize, data: usize },
    #[error("training failed: {0}")]
    Train(String),
    #[error("prediction failed: {0}")]
    Predict(String),
    #[error("no class has both positives and negatives in the validation split")]
    NoScorableClass,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Split plan

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub n_rows: usize,
    /// Row positions held out for hyperparameter tuning, ascending.
    pub tuning: Vec<usize>,
    /// Test positions of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

/// Largest-remainder apportionment of `n` items over `weights / denom`.
/// Equal remainders go to cells in rotated order starting at `rotate`.
fn apportion(n: usize, weights: &[usize], denom: usize, rotate: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = weights.iter().map(|w| n * w / denom).collect();
    let rems: Vec<usize> = weights.iter().map(|w| n * w % denom).collect();
    let left = n - counts.iter().sum::<usize>();
    let k = weights.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(rems[c]), (c + k - rotate % k) % k));
    for &c in order.iter().take(left) {
        counts[c] += 1;
    }
    counts
}

/// Stratified assignment of the rows to cells with the given weights; returns
/// the positions of each cell, ascending.
fn stratified_cells(labels: &[NovaClass], weights: &[usize], denom: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new(); weights.len()];
    for class in NovaClass::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(class.get()));
        members.shuffle(&mut rng);
        let counts = apportion(members.len(), weights, denom, class.index());
        let mut start = 0;
        for (cell, count) in cells.iter_mut().zip(counts) {
            cell.extend_from_slice(&members[start..start + count]);
            start += count;
        }
    }
    cells.iter_mut().for_each(|c| c.sort_unstable());
    cells
}

pub fn make_split_plan(labels: &[NovaClass], seed: u64) -> Result<SplitPlan, EvalError> {
    for class in NovaClass::ALL {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < MIN_CLASS_SIZE {
            return Err(EvalError::ClassTooSmall { class: class.get(), count });
        }
    }
    let mut cells = stratified_cells(labels, &CELL_WEIGHTS, WEIGHT_DENOM, seed);
    let tuning = cells.remove(0);
    Ok(SplitPlan { seed, n_rows: labels.len(), tuning, folds: cells })
}

impl SplitPlan {
    /// Cell name per row: `tuning` or `fold1`..`fold5`.
    pub fn cell_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.n_rows];
        for &i in &self.tuning {
            names[i] = "tuning".into();
        }
        for (k, fold) in self.folds.iter().enumerate() {
            for &i in fold {
                names[i] = format!("fold{}", k + 1);
            }
        }
        names
    }

    /// Training positions for fold `k`: the other folds, never the tuning rows.
    pub fn train_rows(&self, k: usize) -> Vec<usize> {
        let mut rows: Vec<usize> =
            self.folds.iter().enumerate().filter(|&(j, _)| j != k).flat_map(|(_, f)| f.iter().copied()).collect();
        rows.sort_unstable();
        rows
    }

    pub fn write_membership<W: Write>(&self, ids: &[String], writer: W) -> Result<(), EvalError> {
        if ids.len() != self.n_rows {
            return Err(EvalError::PlanMismatch { plan: self.n_rows, data: ids.len() });
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "cell"])?;
        for (id, cell) in ids.iter().zip(self.cell_names()) {
            w.write_record([id.as_str(), cell.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Metrics

fn check_lengths(scores: &[f64], positives: &[bool]) -> Result<(), EvalError> {
    if scores.len() != positives.len() {
        return Err(EvalError::Length { scores: scores.len(), labels: positives.len() });
    }
    Ok(())
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Blocks of equal score in descending order: (positives, total) per block.
fn tie_blocks(scores: &[f64], positives: &[bool]) -> Vec<(usize, usize)> {
    let order = descending(scores);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut j = i;
        let mut pos = 0;
        while j < order.len() && scores[order[j]] == s {
            pos += usize::from(positives[order[j]]);
            j += 1;
        }
        blocks.push((pos, j - i));
        i = j;
    }
    blocks
}

/// Mann-Whitney ROC-AUC; a tied positive/negative pair counts one half.
pub fn roc_auc_ovr(scores: &[f64], positives: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    // Walk blocks from the top: each positive beats every negative below its block.
    let mut negatives_above = 0usize;
    let mut pairs = 0.0f64;
    for (pos, total) in tie_blocks(scores, positives) {
        let neg = total - pos;
        pairs += pos as f64 * (n_neg - negatives_above - neg) as f64 + 0.5 * (pos * neg) as f64;
        negatives_above += neg;
    }
    Ok(pairs / (n_pos as f64 * n_neg as f64))
}

/// Average precision with tied scores handled as one block.
pub fn pr_auc_ovr(scores: &[f64], positives: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0f64);
    for (pos, total) in tie_blocks(scores, positives) {
        tp += pos;
        seen += total;
        ap += (tp as f64 / seen as f64) * (pos as f64 / n_pos as f64);
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// ROC points at every distinct score, starting from (0, 0).
pub fn roc_curve(scores: &[f64], positives: &[bool]) -> Result<Vec<RocPoint>, EvalError> {
    check_lengths(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut pts = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0, 0);
    let order = descending(scores);
    for (block, (pos, total)) in distinct_scores(scores, &order).into_iter().zip(tie_blocks(scores, positives)) {
        tp += pos;
        fp += total - pos;
        pts.push(RocPoint { threshold: block, fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64 });
    }
    Ok(pts)
}

/// Precision/recall at every distinct score threshold.
pub fn pr_curve(scores: &[f64], positives: &[bool]) -> Result<Vec<PrPoint>, EvalError> {
    check_lengths(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let order = descending(scores);
    let (mut tp, mut seen) = (0, 0);
    let mut pts = Vec::new();
    for (block, (pos, total)) in distinct_scores(scores, &order).into_iter().zip(tie_blocks(scores, positives)) {
        tp += pos;
        seen += total;
        pts.push(PrPoint { threshold: block, recall: tp as f64 / n_pos as f64, precision: tp as f64 / seen as f64 });
    }
    Ok(pts)
}

fn distinct_scores(scores: &[f64], order: &[usize]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &i in order {
        if out.last() != Some(&scores[i]) {
            out.push(scores[i]);
        }
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Model families

/// Anything producing NOVA probabilities for a feature row.
pub trait ProbaModel: Send + Sync {
    fn predict_proba(&self, row: &[Option<f64>]) -> Result<NovaProbabilities, String>;
}

/// A trainable model type with its hyperparameters.
pub trait ModelFamily: Sync {
    type Params: Clone + Debug + Serialize + Send + Sync;
    type Model: ProbaModel;

    fn name(&self) -> String;
    fn validate(&self, params: &Self::Params, n_features: usize) -> Result<(), String>;
    fn train(&self, x: &FeatureMatrix, y: &[NovaClass], params: &Self::Params) -> Result<Self::Model, String>;
}

impl ProbaModel for ForestModel {
    fn predict_proba(&self, row: &[Option<f64>]) -> Result<NovaProbabilities, String> {
        ForestModel::predict_proba(self, row).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RandomForest;

impl ModelFamily for RandomForest {
    type Params = ForestParams;
    type Model = ForestModel;

    fn name(&self) -> String {
        "random_forest".into()
    }

    fn validate(&self, params: &ForestParams, n_features: usize) -> Result<(), String> {
        params.validate(n_features).map_err(|e| e.to_string())
    }

    fn train(&self, x: &FeatureMatrix, y: &[NovaClass], params: &ForestParams) -> Result<ForestModel, String> {
        forest::train(x, y, params).map_err(|e| e.to_string())
    }
}

/// Baseline that ignores its input and predicts (1/4, 1/4, 1/4, 1/4).
#[derive(Debug, Clone, Default)]
pub struct Uniform;

pub struct UniformModel;

impl ProbaModel for UniformModel {
    fn predict_proba(&self, _row: &[Option<f64>]) -> Result<NovaProbabilities, String> {
        Ok(NovaProbabilities::uniform())
    }
}

impl ModelFamily for Uniform {
    type Params = ();
    type Model = UniformModel;

    fn name(&self) -> String {
        "uniform".into()
    }

    fn validate(&self, _: &(), _: usize) -> Result<(), String> {
        Ok(())
    }

    fn train(&self, _: &FeatureMatrix, _: &[NovaClass], _: &()) -> Result<UniformModel, String> {
        Ok(UniformModel)
    }
}

fn predict_rows<M: ProbaModel>(model: &M, x: &FeatureMatrix) -> Result<Vec<NovaProbabilities>, EvalError> {
    (0..x.n_rows()).into_par_iter().map(|i| model.predict_proba(x.row(i)).map_err(EvalError::Predict)).collect()
}

/// One-vs-rest (AUC, AP) per class; `None` where a class has no positives or no negatives.
fn per_class_metrics(probs: &[NovaProbabilities], labels: &[NovaClass]) -> [Option<(f64, f64)>; 4] {
    NovaClass::ALL.map(|class| {
        let scores: Vec<f64> = probs.iter().map(|p| p.get(class)).collect();
        let positives: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        let auc = roc_auc_ovr(&scores, &positives).ok()?;
        let ap = pr_auc_ovr(&scores, &positives).ok()?;
        Some((auc, ap))
    })
}

// ---------------------------------------------------------------------------
// Grid search

#[derive(Debug, Clone, Serialize)]
pub struct GridTrace {
    pub index: usize,
    pub params: serde_json::Value,
    /// Mean one-vs-rest AUC on the validation part of the tuning rows.
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult<P> {
    pub best: P,
    pub best_index: usize,
    pub trace: Vec<GridTrace>,
}

/// Exhaustive search. The objective is the mean one-vs-rest AUC of a model
/// trained on a stratified 80 % of `x` and scored on the other 20 %. Equal
/// objectives keep the earlier grid point.
pub fn grid_search<F: ModelFamily>(
    family: &F,
    grid: &[F::Params],
    x: &FeatureMatrix,
    y: &[NovaClass],
    seed: u64,
) -> Result<GridResult<F::Params>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    for (index, p) in grid.iter().enumerate() {
        family.validate(p, x.n_features()).map_err(|message| EvalError::InvalidGridPoint { index, message })?;
    }
    let mut cells = stratified_cells(y, &[4, 1], 5, seed);
    let valid = cells.pop().unwrap();
    let fit = cells.pop().unwrap();
    let (x_fit, x_val) = (x.select(&fit), x.select(&valid));
    let y_fit: Vec<NovaClass> = fit.iter().map(|&i| y[i]).collect();
    let y_val: Vec<NovaClass> = valid.iter().map(|&i| y[i]).collect();

    let outcomes: Vec<Result<f64, String>> = grid
        .par_iter()
        .map(|p| {
            let model = family.train(&x_fit, &y_fit, p)?;
            let probs = predict_rows(&model, &x_val).map_err(|e| e.to_string())?;
            let aucs: Vec<f64> = per_class_metrics(&probs, &y_val).iter().flatten().map(|m| m.0).collect();
            if aucs.is_empty() {
                return Err(EvalError::NoScorableClass.to_string());
            }
            Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut trace = Vec::with_capacity(grid.len());
    for (index, (p, outcome)) in grid.iter().zip(outcomes).enumerate() {
        let params = serde_json::to_value(p).unwrap_or(serde_json::Value::Null);
        match outcome {
            Ok(v) => {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((index, v));
                }
                trace.push(GridTrace { index, params, objective: Some(v), error: None });
            }
            Err(e) => trace.push(GridTrace { index, params, objective: None, error: Some(e) }),
        }
    }
    match best {
        Some((i, _)) => Ok(GridResult { best: grid[i].clone(), best_index: i, trace }),
        None => Err(EvalError::AllFailed(trace[0].error.clone().unwrap_or_default())),
    }
}

// ---------------------------------------------------------------------------
// Full protocol

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: NovaClass,
    pub auc: MetricSummary,
    pub aup: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub auc: [f64; 4],
    pub aup: [f64; 4],
    /// `confusion[true][predicted]`, class order 1..4.
    pub confusion: [[u32; 4]; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub feature_spec: String,
    pub seed: u64,
    pub n_rows: usize,
    pub n_tuning: usize,
    pub chosen_params: serde_json::Value,
    pub grid_trace: Vec<serde_json::Value>,
    pub per_class: Vec<ClassMetrics>,
    pub folds: Vec<FoldResult>,
}

impl EvalReport {
    pub fn class_set(&self) -> Vec<NovaClass> {
        self.per_class.iter().map(|c| c.class).collect()
    }

    pub fn auc(&self, class: NovaClass) -> Option<&MetricSummary> {
        self.per_class.iter().find(|c| c.class == class).map(|c| &c.auc)
    }

    pub fn aup(&self, class: NovaClass) -> Option<&MetricSummary> {
        self.per_class.iter().find(|c| c.class == class).map(|c| &c.aup)
    }
}

/// Wall-clock seconds per phase. Kept apart from the report so that repeated
/// runs produce identical report files.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub grid_search_s: f64,
    pub folds_s: f64,
    pub total_s: f64,
}

/// Out-of-fold prediction for one test row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OofPrediction {
    pub id: String,
    pub fold: usize,
    pub label: NovaClass,
    pub probs: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub timings: Timings,
    pub predictions: Vec<OofPrediction>,
}

pub fn evaluate<F: ModelFamily>(
    family: &F,
    feature_spec: &str,
    x: &FeatureMatrix,
    y: &[NovaClass],
    plan: &SplitPlan,
    grid: &[F::Params],
) -> Result<EvalOutcome, EvalError> {
    if plan.n_rows != x.n_rows() || y.len() != x.n_rows() {
        return Err(EvalError::PlanMismatch { plan: plan.n_rows, data: x.n_rows().min(y.len()) });
    }
    let start = Instant::now();
    let x_tune = x.select(&plan.tuning);
    let y_tune: Vec<NovaClass> = plan.tuning.iter().map(|&i| y[i]).collect();
    let search = grid_search(family, grid, &x_tune, &y_tune, plan.seed)?;
    let grid_s = start.elapsed().as_secs_f64();

    let fold_start = Instant::now();
    let folds: Vec<(FoldResult, Vec<OofPrediction>)> = (0..plan.folds.len())
        .into_par_iter()
        .map(|k| {
            let train = plan.train_rows(k);
            let test = &plan.folds[k];
            let y_train: Vec<NovaClass> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<NovaClass> = test.iter().map(|&i| y[i]).collect();
            let model = family.train(&x.select(&train), &y_train, &search.best).map_err(EvalError::Train)?;
            let probs = predict_rows(&model, &x.select(test))?;
            let metrics = per_class_metrics(&probs, &y_test);
            let mut auc = [0.0; 4];
            let mut aup = [0.0; 4];
            for (c, m) in metrics.iter().enumerate() {
                let (a, p) = m.ok_or(EvalError::SingleClass)?;
                auc[c] = a;
                aup[c] = p;
            }
            let mut confusion = [[0u32; 4]; 4];
            for (p, l) in probs.iter().zip(&y_test) {
                confusion[l.index()][p.predict_class().index()] += 1;
            }
            let preds = test
                .iter()
                .zip(&probs)
                .map(|(&i, p)| OofPrediction { id: x.ids()[i].clone(), fold: k + 1, label: y[i], probs: *p.as_array() })
                .collect();
            Ok((FoldResult { fold: k + 1, n_train: train.len(), n_test: test.len(), auc, aup, confusion }, preds))
        })
        .collect::<Result<_, EvalError>>()?;
    let folds_s = fold_start.elapsed().as_secs_f64();

    let (fold_results, preds): (Vec<FoldResult>, Vec<Vec<OofPrediction>>) = folds.into_iter().unzip();
    let per_class = NovaClass::ALL
        .iter()
        .map(|&class| {
            let aucs: Vec<f64> = fold_results.iter().map(|f| f.auc[class.index()]).collect();
            let aups: Vec<f64> = fold_results.iter().map(|f| f.aup[class.index()]).collect();
            let (am, asd) = mean_std(&aucs);
            let (pm, psd) = mean_std(&aups);
            ClassMetrics { class, auc: MetricSummary { mean: am, std: asd }, aup: MetricSummary { mean: pm, std: psd } }
        })
        .collect();
    let report = EvalReport {
        model: family.name(),
        feature_spec: feature_spec.to_string(),
        seed: plan.seed,
        n_rows: plan.n_rows,
        n_tuning: plan.tuning.len(),
        chosen_params: serde_json::to_value(&search.best).unwrap_or(serde_json::Value::Null),
        grid_trace: search.trace.iter().map(|t| serde_json::to_value(t).expect("trace serializes")).collect(),
        per_class,
        folds: fold_results,
    };
    let timings = Timings { grid_search_s: grid_s, folds_s, total_s: start.elapsed().as_secs_f64() };
    Ok(EvalOutcome { report, timings, predictions: preds.into_iter().flatten().collect() })
}

/// ROC and PR points per fold and class: `fold,class,curve,threshold,x,y`
/// where `(x, y)` is `(fpr, tpr)` or `(recall, precision)`.
pub fn write_curves<W: Write>(predictions: &[OofPrediction], writer: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fold", "class", "curve", "threshold", "x", "y"])?;
    let mut folds: Vec<usize> = predictions.iter().map(|p| p.fold).collect();
    folds.sort_unstable();
    folds.dedup();
    for fold in folds {
        let rows: Vec<&OofPrediction> = predictions.iter().filter(|p| p.fold == fold).collect();
        for class in NovaClass::ALL {
            let scores: Vec<f64> = rows.iter().map(|p| p.probs[class.index()]).collect();
            let pos: Vec<bool> = rows.iter().map(|p| p.label == class).collect();
            let (f, c) = (fold.to_string(), class.to_string());
            if let Ok(roc) = roc_curve(&scores, &pos) {
                for pt in roc {
                    w.write_record([&f, &c, "roc", &pt.threshold.to_string(), &pt.fpr.to_string(), &pt.tpr.to_string()])?;
                }
            }
            if let Ok(pr) = pr_curve(&scores, &pos) {
                for pt in pr {
                    w.write_record([&f, &c, "pr", &pt.threshold.to_string(), &pt.recall.to_string(), &pt.precision.to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::FeatureColumn;
    use proptest::prelude::*;
    use rand::Rng;

    fn class(c: u8) -> NovaClass {
        NovaClass::new(c).unwrap()
    }

    fn labels_of(counts: [usize; 4]) -> Vec<NovaClass> {
        counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(class(c as u8 + 1), n)).collect()
    }

    /// Brute-force concordance over all positive/negative pairs.
    fn auc_oracle(s: &[f64], y: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] && !y[j] {
                    den += 1.0;
                    num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    /// Precision/recall recomputed from scratch at every distinct threshold.
    fn ap_oracle(s: &[f64], y: &[bool]) -> f64 {
        let mut t: Vec<f64> = s.to_vec();
        t.sort_by(|a, b| b.total_cmp(a));
        t.dedup();
        let n_pos = y.iter().filter(|&&v| v).count() as f64;
        let mut prev_recall = 0.0;
        let mut ap = 0.0;
        for th in t {
            let tp = s.iter().zip(y).filter(|(v, p)| **v >= th && **p).count() as f64;
            let pp = s.iter().filter(|v| **v >= th).count() as f64;
            let recall = tp / n_pos;
            ap += (recall - prev_recall) * (tp / pp);
            prev_recall = recall;
        }
        ap
    }

    #[test]
    fn metric_examples() {
        let s = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0];
        let y = [true, true, true, true, true, false, false, false, false, false];
        assert_eq!(roc_auc_ovr(&s, &y).unwrap(), 1.0);
        assert_eq!(pr_auc_ovr(&s, &y).unwrap(), 1.0);
        let flat = [0.3; 8];
        let y = [true, false, false, true, false, false, false, false];
        assert_eq!(roc_auc_ovr(&flat, &y).unwrap(), 0.5);
        assert_eq!(pr_auc_ovr(&flat, &y).unwrap(), 0.25);
        assert!(matches!(roc_auc_ovr(&[0.1, 0.2], &[true, true]), Err(EvalError::SingleClass)));
        assert!(matches!(pr_auc_ovr(&[0.1, 0.2], &[false, false]), Err(EvalError::NoPositives)));
    }

    #[test]
    fn metrics_match_oracles_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=20);
            // Coarse scores so ties are common.
            let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect();
            let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            y[0] = true;
            y[1] = false;
            assert!((roc_auc_ovr(&s, &y).unwrap() - auc_oracle(&s, &y)).abs() < 1e-12);
            assert!((pr_auc_ovr(&s, &y).unwrap() - ap_oracle(&s, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn curves_end_at_full_recall() {
        let s = [0.9, 0.4, 0.4, 0.1];
        let y = [true, false, true, false];
        let roc = roc_curve(&s, &y).unwrap();
        assert_eq!(roc.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(roc.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        // Trapezoidal area under the ROC points equals the rank AUC.
        let area: f64 = roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
        assert!((area - roc_auc_ovr(&s, &y).unwrap()).abs() < 1e-12);
        let pr = pr_curve(&s, &y).unwrap();
        assert_eq!(pr.last().unwrap().recall, 1.0);
    }

    #[test]
    fn plan_for_fifty_per_class() {
        let labels = labels_of([50; 4]);
        let plan = make_split_plan(&labels, 42).unwrap();
        let count = |cell: &[usize], c: u8| cell.iter().filter(|&&i| labels[i] == class(c)).count();
        for c in 1..=4 {
            assert_eq!(count(&plan.tuning, c), 10);
            for f in &plan.folds {
                assert_eq!(count(f, c), 8);
            }
        }
        assert_eq!(plan, make_split_plan(&labels, 42).unwrap());
        assert_ne!(plan, make_split_plan(&labels, 43).unwrap());
    }

    #[test]
    fn small_class_is_named() {
        let labels = labels_of([20, 20, 9, 20]);
        assert!(matches!(make_split_plan(&labels, 1), Err(EvalError::ClassTooSmall { class: 3, count: 9 })));
    }

    #[test]
    fn apportion_matches_quota_bounds() {
        for n in 0..200 {
            for rot in 0..6 {
                let c = apportion(n, &CELL_WEIGHTS, WEIGHT_DENOM, rot);
                assert_eq!(c.iter().sum::<usize>(), n);
                for (k, &v) in c.iter().enumerate() {
                    let q = n as f64 * CELL_WEIGHTS[k] as f64 / WEIGHT_DENOM as f64;
                    assert!((v as f64 - q).abs() < 1.0);
                }
            }
        }
    }

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let d = rows[0].len();
        FeatureMatrix::new(
            (0..d).map(|j| FeatureColumn::new(format!("f{j}"), "u")).collect(),
            (0..rows.len()).map(|i| format!("r{i:04}")).collect(),
            rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_model_scores_half() {
        let labels = labels_of([30; 4]);
        let x = matrix(&labels.iter().map(|l| vec![f64::from(l.get())]).collect::<Vec<_>>());
        let plan = make_split_plan(&labels, 42).unwrap();
        let out = evaluate(&Uniform, "nutrients11", &x, &labels, &plan, &[()]).unwrap();
        for c in &out.report.per_class {
            assert_eq!(c.auc, MetricSummary { mean: 0.5, std: 0.0 });
        }
        assert_eq!(out.predictions.len(), labels.len() - plan.tuning.len());
    }

    #[test]
    fn deeper_trees_win_on_quadrant_data() {
        // XOR of the signs of (x, y): every stump, and so any average of
        // stumps, is blind to it; two levels of splits separate it exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..160 {
            let q = i % 4;
            let sx = if q & 1 == 1 { 1.0 } else { -1.0 };
            let sy = if q & 2 == 2 { 1.0 } else { -1.0 };
            rows.push(vec![sx * rng.random_range(0.1..1.0), sy * rng.random_range(0.1..1.0)]);
            labels.push(class(if sx * sy > 0.0 { 1 } else { 4 }));
        }
        let x = matrix(&rows);
        let base = ForestParams { n_trees: 15, features_per_split: Some(2), ..Default::default() };
        let grid = [ForestParams { max_depth: Some(1), ..base }, ForestParams { max_depth: None, ..base }];
        let res = grid_search(&RandomForest, &grid, &x, &labels, 42).unwrap();
        assert_eq!(res.best_index, 1, "{:?}", res.trace);
        assert_eq!(grid_search(&RandomForest, &grid[..1], &x, &labels, 42).unwrap().best_index, 0);
        let bad = [ForestParams { n_trees: 0, ..base }];
        assert!(matches!(grid_search(&RandomForest, &bad, &x, &labels, 42), Err(EvalError::InvalidGridPoint { index: 0, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn plan_partitions_rows(counts in prop::array::uniform4(10usize..40), seed in any::<u64>()) {
            let mut labels = labels_of(counts);
            labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let plan = make_split_plan(&labels, seed).unwrap();
            let mut seen = vec![0u8; labels.len()];
            for &i in plan.tuning.iter().chain(plan.folds.iter().flatten()) {
                seen[i] += 1;
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            for k in 0..N_FOLDS {
                let train = plan.train_rows(k);
                prop_assert!(train.iter().all(|i| !plan.folds[k].contains(i) && !plan.tuning.contains(i)));
            }
        }

        #[test]
        fn auc_invariances(vals in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..40)) {
            let s: Vec<f64> = vals.iter().map(|v| (v.0 * 8.0).round() / 8.0).collect();
            let y: Vec<bool> = vals.iter().map(|v| v.1).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let a = roc_auc_ovr(&s, &y).unwrap();
            let neg: Vec<bool> = y.iter().map(|b| !b).collect();
            prop_assert!((a + roc_auc_ovr(&s, &neg).unwrap() - 1.0).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((a - roc_auc_ovr(&t, &y).unwrap()).abs() < 1e-12);
        }
    }
}
