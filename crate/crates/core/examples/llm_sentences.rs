//! Build the text sentences fed to an embedding model, then join vectors back by id.
//!
//! A real run embeds each sentence externally. Here a toy hash stands in so the
//! join and feature assembly can be shown end to end.

use fproxkit::features::{assemble, build_sentence, EmbeddingTable, FeatureSpec, Inputs, MissingNutrients};
use fproxkit::ingest::sample_corpus;

fn main() {
    let (records, _) = sample_corpus();
    println!("{}\n", build_sentence(&records[0], MissingNutrients::Omit).unwrap());

    let mut table = EmbeddingTable::new(8);
    for record in records.iter().filter(|r| r.ingredients_text.is_some()) {
        let sentence = build_sentence(record, MissingNutrients::Omit).unwrap();
        table.insert(record.id.clone(), toy_embedding(&sentence, 8)).unwrap();
    }
    let spec = FeatureSpec::Embedding { dim: Some(8) };
    let inputs = Inputs { embeddings: Some(&table), require_label: true, ..Default::default() };
    let assembled = assemble(&records, &spec, &inputs).unwrap();
    println!("{} rows x {} features, {} dropped", assembled.matrix.n_rows(), assembled.matrix.n_features(), assembled.dropped.len());
}

fn toy_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for (i, b) in text.bytes().enumerate() {
        v[(i + b as usize) % dim] += b as f64 / 255.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}
