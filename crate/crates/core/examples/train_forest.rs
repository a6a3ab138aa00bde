//! Train a forest on the 11 nutrients, round-trip it through JSON and predict.

use fproxkit::features::{assemble, FeatureSpec, Inputs};
use fproxkit::forest::{train, ForestModel, ForestParams};
use fproxkit::ingest::sample_corpus;

fn main() {
    let (records, _) = sample_corpus();
    let inputs = Inputs { require_label: true, ..Default::default() };
    let assembled = assemble(&records, &FeatureSpec::Nutrients11, &inputs).unwrap();
    let (x, y) = assembled.labelled();

    let params = ForestParams { n_trees: 50, seed: 7, ..Default::default() };
    let model = train(&x, &y, &params).unwrap();
    let json = model.to_json();
    let model = ForestModel::from_json(&json).unwrap();
    println!("{} trees, {} bytes of JSON", model.trees.len(), json.len());

    let hits = x.rows().zip(&y).filter(|(row, label)| model.predict_class(row).unwrap() == **label).count();
    println!("training accuracy {:.3}", hits as f64 / y.len() as f64);
    for (id, row) in x.ids().iter().zip(x.rows()).take(5) {
        let p = model.predict_proba(row).unwrap();
        println!("{id}  {:.2?}", p.as_array());
    }
}
