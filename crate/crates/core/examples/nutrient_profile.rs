//! Fit log-space nutrient statistics and z-score two products against them.

use fproxkit::ingest::sample_corpus;
use fproxkit::profiler::{compare_profiles, fit_stats, zscore};
use fproxkit::Nutrient;

fn main() {
    let (records, _) = sample_corpus();
    let stats = fit_stats(records.iter().map(|r| &r.panel)).unwrap();
    for nutrient in Nutrient::ALL {
        if let Some(s) = stats.get(nutrient) {
            println!("{:<22} mu {:>7.3}  sigma {:.3}  n {}", nutrient.display_name(), s.mu, s.sigma, s.n_samples);
        }
    }

    let (a, b) = (&records[1], &records[2]);
    let (za, zb) = (zscore(&a.panel, &stats), zscore(&b.panel, &stats));
    println!("\n{:<22} {:>8} {:>8}", "z-score", a.id, b.id);
    for nutrient in Nutrient::ALL {
        let fmt = |z: Option<f64>| z.map(|z| format!("{z:8.2}")).unwrap_or_else(|| format!("{:>8}", "-"));
        println!("{:<22} {} {}", nutrient.display_name(), fmt(za.get(nutrient)), fmt(zb.get(nutrient)));
    }
    let cmp = compare_profiles(&a.panel, &b.panel).unwrap();
    println!("\nchanged >10%: {:.2}, changed >=10x: {:.2}", cmp.frac_changed_10pct, cmp.frac_changed_10x);
}
