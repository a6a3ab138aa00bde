//! Held-out tuning split plus five-fold evaluation, nutrients alone against nutrients plus additives.

use fproxkit::eval::{evaluate, make_split_plan, RandomForest};
use fproxkit::features::{assemble, FeatureSpec, Inputs};
use fproxkit::forest::ForestParams;
use fproxkit::ingest::sample_corpus;
use fproxkit::ingredients::AdditiveLexicon;
use fproxkit::report::metrics_table;

fn main() {
    let (records, _) = sample_corpus();
    let lexicon = AdditiveLexicon::builtin();
    let inputs = Inputs { lexicon: Some(&lexicon), require_label: true, ..Default::default() };
    let grid: Vec<ForestParams> = [Some(10), None]
        .into_iter()
        .map(|max_depth| ForestParams { n_trees: 50, max_depth, seed: 42, ..Default::default() })
        .collect();

    let mut reports = Vec::new();
    for spec in [FeatureSpec::Nutrients11, FeatureSpec::Nutrients11PlusAdditives] {
        let assembled = assemble(&records, &spec, &inputs).unwrap();
        let (x, y) = assembled.labelled();
        let plan = make_split_plan(&y, 42).unwrap();
        let outcome = evaluate(&RandomForest, &spec.name(), &x, &y, &plan, &grid).unwrap();
        println!("{}: best grid point {}, {:.2} s", spec.name(), outcome.report.chosen_params, outcome.timings.total_s);
        reports.push(outcome.report);
    }
    metrics_table(&reports).unwrap().write_csv(std::io::stdout()).unwrap();
}
