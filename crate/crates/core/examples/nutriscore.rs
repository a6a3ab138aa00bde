//! Nutri-Score and SIGA for a handful of sample products.

use fproxkit::ingest::sample_corpus;
use fproxkit::scoring::{nutriscore, siga_for_record, PointTables};

fn main() {
    let (records, _) = sample_corpus();
    let tables = PointTables::builtin();
    println!("{:<10} {:<40} {:>5} {:>5} {:>6}", "id", "name", "score", "label", "siga");
    for record in records.iter().step_by(37) {
        let score = match nutriscore(record, &tables) {
            Ok(r) => format!("{:>5} {:>5}", r.score, r.label),
            Err(e) => format!("{e}"),
        };
        let siga = siga_for_record(record).map(|c| c.to_string()).unwrap_or_else(|_| "-".into());
        println!("{:<10} {:<40} {score} {siga:>6}", record.id, truncate(&record.name, 40));
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
