//! FPro distribution per food category, ordered by median.

use fproxkit::features::{assemble, FeatureSpec, Inputs};
use fproxkit::forest::{train, ForestParams};
use fproxkit::fpro::rank_by_fpro;
use fproxkit::ingest::sample_corpus;
use fproxkit::report::category_fpro_summary;

fn main() {
    let (records, _) = sample_corpus();
    let labelled = assemble(&records, &FeatureSpec::Nutrients11, &Inputs { require_label: true, ..Default::default() }).unwrap();
    let (x, y) = labelled.labelled();
    let model = train(&x, &y, &ForestParams::default()).unwrap();
    let all = assemble(&records, &FeatureSpec::Nutrients11, &Inputs::default()).unwrap();
    let ranking = rank_by_fpro(&model, &all.matrix).unwrap();

    let category: std::collections::HashMap<_, _> =
        records.iter().filter_map(|r| Some((r.id.as_str(), r.category.as_deref()?))).collect();
    let scored = ranking.items.iter().filter_map(|i| Some((*category.get(i.id.as_str())?, i.fpro)));
    let report = category_fpro_summary(scored, 20);
    for s in &report.summaries {
        println!("{:<20} n={:<3} median {:.3}  IQR [{:.3}, {:.3}]", s.category, s.n, s.median, s.lower_quartile, s.upper_quartile);
    }
    for w in &report.warnings {
        println!("note: {w}");
    }
}
