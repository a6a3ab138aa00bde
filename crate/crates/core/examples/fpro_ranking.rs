//! Rank products by FPro and project their class probabilities onto two components.

use fproxkit::features::{assemble, FeatureSpec, Inputs};
use fproxkit::forest::{train, ForestParams};
use fproxkit::fpro::{pca_decision_space, rank_by_fpro};
use fproxkit::ingest::sample_corpus;

fn main() {
    let (records, _) = sample_corpus();
    let labelled = assemble(&records, &FeatureSpec::Nutrients11, &Inputs { require_label: true, ..Default::default() }).unwrap();
    let (x, y) = labelled.labelled();
    let model = train(&x, &y, &ForestParams::default()).unwrap();

    let all = assemble(&records, &FeatureSpec::Nutrients11, &Inputs::default()).unwrap();
    let ranking = rank_by_fpro(&model, &all.matrix).unwrap();
    let names: std::collections::HashMap<_, _> = records.iter().map(|r| (r.id.as_str(), r.name.as_str())).collect();
    println!("most processed:");
    for item in ranking.items.iter().take(5) {
        println!("  {:.3}  {}", item.fpro, names[item.id.as_str()]);
    }
    println!("least processed:");
    for item in ranking.items.iter().rev().take(5) {
        println!("  {:.3}  {}", item.fpro, names[item.id.as_str()]);
    }

    let probs: Vec<[f64; 4]> = ranking.items.iter().map(|i| i.probs).collect();
    let pca = pca_decision_space(&probs).unwrap();
    println!("explained variance {:.3?}", pca.explained_variance);
    println!("pc1 loadings {:.3?}", pca.components[0]);
}
