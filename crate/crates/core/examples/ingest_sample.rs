//! Load the bundled corpus and print what ingestion kept, repaired and dropped.

use fproxkit::ingest::{filter_complete, sample_corpus, RequiredField};

fn main() {
    let (records, report) = sample_corpus();
    println!("read {} rows, kept {}", report.rows_read, report.rows_kept);
    for (what, n) in &report.repairs {
        println!("  repaired {what}: {n}");
    }
    for (why, n) in &report.rejections {
        println!("  rejected {why}: {n}");
    }
    let complete = filter_complete(&records, &RequiredField::case_study());
    println!("{} records have every case-study field", complete.len());

    let first = &records[0];
    println!("\n{} ({}): nova {:?}", first.name, first.id, first.nova.map(|c| c.get()));
    for (nutrient, value) in first.panel.iter() {
        println!("  {:<22} {:?}", nutrient.display_name(), value);
    }
}
