//! Model inputs: feature matrices, LLM input sentences and external embeddings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forest::{FeatureColumn, FeatureMatrix, ForestError};
use crate::ingest::ProductRecord;
use crate::ingredients::{count_additives, count_ingredients, parse_ingredients, AdditiveLexicon};
use crate::nova::NovaClass;
use crate::nutrient::Nutrient;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("product `{0}` has an empty name")]
    EmptyName(String),
    #[error("embeddings line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("feature spec `{0}` is not recognised")]
    UnknownSpec(String),
    #[error("spec needs {0}")]
    MissingInput(&'static str),
    #[error("spec expects embedding dimension {expected}, table has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    Nutrients11,
    Nutrients11PlusAdditives,
    IngredientCountOnly,
    AdditiveCountOnly,
    /// `dim: None` takes the dimension from the embedding table.
    Embedding { dim: Option<usize> },
}

impl FeatureSpec {
    pub fn name(&self) -> String {
        match self {
            FeatureSpec::Nutrients11 => "nutrients11".into(),
            FeatureSpec::Nutrients11PlusAdditives => "nutrients11_plus_additives".into(),
            FeatureSpec::IngredientCountOnly => "ingredient_count_only".into(),
            FeatureSpec::AdditiveCountOnly => "additive_count_only".into(),
            FeatureSpec::Embedding { dim: None } => "embedding".into(),
            FeatureSpec::Embedding { dim: Some(d) } => format!("embedding:{d}"),
        }
    }

    /// Column schema in canonical order.
    pub fn schema(&self, embedding_dim: usize) -> Vec<FeatureColumn> {
        let nutrients = || Nutrient::ALL.iter().map(|n| FeatureColumn::new(n.column(), "g/100g"));
        match self {
            FeatureSpec::Nutrients11 => nutrients().collect(),
            FeatureSpec::Nutrients11PlusAdditives => {
                nutrients().chain([FeatureColumn::new("additive_count", "count")]).collect()
            }
            FeatureSpec::IngredientCountOnly => vec![FeatureColumn::new("ingredient_count", "count")],
            FeatureSpec::AdditiveCountOnly => vec![FeatureColumn::new("additive_count", "count")],
            FeatureSpec::Embedding { dim } => {
                (0..dim.unwrap_or(embedding_dim)).map(|i| FeatureColumn::new(format!("v{i}"), "embedding")).collect()
            }
        }
    }

    pub fn needs_lexicon(&self) -> bool {
        matches!(self, FeatureSpec::Nutrients11PlusAdditives | FeatureSpec::AdditiveCountOnly)
    }

    pub fn needs_embeddings(&self) -> bool {
        matches!(self, FeatureSpec::Embedding { .. })
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureSpec {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "nutrients11" => FeatureSpec::Nutrients11,
            "nutrients11_plus_additives" => FeatureSpec::Nutrients11PlusAdditives,
            "ingredient_count_only" => FeatureSpec::IngredientCountOnly,
            "additive_count_only" => FeatureSpec::AdditiveCountOnly,
            "embedding" => FeatureSpec::Embedding { dim: None },
            other => match other.strip_prefix("embedding:").and_then(|d| d.parse().ok()) {
                Some(d) if d > 0 => FeatureSpec::Embedding { dim: Some(d) },
                _ => return Err(FeatureError::UnknownSpec(s.to_string())),
            },
        })
    }
}

/// How absent nutrients appear in a sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MissingNutrients {
    /// Leave them out, as in the worked example of the template.
    #[default]
    Omit,
    /// Emit `unknown of <nutrient>`.
    Placeholder,
}

/// Grams with at most two decimals and no trailing zeros.
pub fn format_grams(value: f64) -> String {
    let s = format!("{value:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// `<NAME> has the ingredients: <LIST>, and the nutrients: <v>g of <nutrient>, ...`
pub fn build_sentence(record: &ProductRecord, missing: MissingNutrients) -> Result<String, FeatureError> {
    let name = record.name.trim();
    if name.is_empty() {
        return Err(FeatureError::EmptyName(record.id.clone()));
    }
    let ingredients = record
        .ingredients_text
        .as_deref()
        .map(|t| t.trim().trim_end_matches('.').trim())
        .filter(|t| !t.is_empty())
        .unwrap_or("unknown");
    let nutrients: Vec<String> = record
        .panel
        .iter()
        .filter_map(|(n, v)| match (v, missing) {
            (Some(v), _) => Some(format!("{}g of {}", format_grams(v), n.display_name())),
            (None, MissingNutrients::Placeholder) => Some(format!("unknown of {}", n.display_name())),
            (None, MissingNutrients::Omit) => None,
        })
        .collect();
    let nutrients = if nutrients.is_empty() { "unknown".to_string() } else { nutrients.join(", ") };
    Ok(format!("{name} has the ingredients: {ingredients}, and the nutrients: {nutrients}."))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, vectors: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), FeatureError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(FeatureError::Embedding {
                line: 0,
                message: format!("`{id}` has {} values, expected {}", vector.len(), self.dim),
            });
        }
        if self.vectors.contains_key(&id) {
            return Err(FeatureError::Embedding { line: 0, message: format!("duplicate id `{id}`") });
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    /// Reads `dim=<d>`, then a CSV header `id,v0,...`, then one row per id.
    pub fn read<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let err = |line: usize, message: String| FeatureError::Embedding { line, message };
        let mut lines = BufReader::new(reader).lines();
        let first = lines.next().transpose()?.ok_or_else(|| err(1, "missing `dim=` line".into()))?;
        let dim: usize = first
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| err(1, format!("expected `dim=<positive integer>`, found `{first}`")))?;
        let mut table = EmbeddingTable::new(dim);
        let header = lines.next().transpose()?.ok_or_else(|| err(2, "missing column header".into()))?;
        if header.split(',').count() != dim + 1 || !header.starts_with("id") {
            return Err(err(2, format!("header must be `id` plus {dim} value columns")));
        }
        for (i, line) in lines.enumerate() {
            let line_no = i + 3;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let id = cells.next().unwrap_or_default().trim().to_string();
            if id.is_empty() {
                return Err(err(line_no, "empty id".into()));
            }
            let values = cells
                .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err(line_no, "non-numeric value".into()))?;
            if values.len() != dim {
                return Err(err(line_no, format!("{} values, expected {dim}", values.len())));
            }
            if table.vectors.contains_key(&id) {
                return Err(err(line_no, format!("duplicate id `{id}`")));
            }
            table.vectors.insert(id, values);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        Self::read(std::fs::File::open(path)?)
    }

    /// Rows in id order; values use shortest round-trip formatting.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<(), FeatureError> {
        writeln!(writer, "dim={}", self.dim)?;
        let header: Vec<String> = std::iter::once("id".to_string()).chain((0..self.dim).map(|i| format!("v{i}"))).collect();
        writeln!(writer, "{}", header.join(","))?;
        for (id, v) in &self.vectors {
            let cells: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            writeln!(writer, "{id},{}", cells.join(","))?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedRow {
    pub id: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub matrix: FeatureMatrix,
    /// NOVA label per matrix row, when known.
    pub labels: Vec<Option<NovaClass>>,
    pub dropped: Vec<DroppedRow>,
}

impl Assembled {
    /// Labelled rows only, with labels unwrapped.
    pub fn labelled(&self) -> (FeatureMatrix, Vec<NovaClass>) {
        let keep: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i].is_some()).collect();
        (self.matrix.select(&keep), keep.iter().map(|&i| self.labels[i].unwrap()).collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Inputs<'a> {
    pub lexicon: Option<&'a AdditiveLexicon>,
    pub embeddings: Option<&'a EmbeddingTable>,
    /// Drop rows without a NOVA label (reason `no_label`).
    pub require_label: bool,
}

fn row_for(record: &ProductRecord, spec: &FeatureSpec, inputs: &Inputs<'_>) -> Result<Vec<Option<f64>>, &'static str> {
    if inputs.require_label && record.nova.is_none() {
        return Err("no_label");
    }
    let tree = || record.ingredients_text.as_deref().map(parse_ingredients).ok_or("no_ingredients");
    let additives = || -> Result<Option<f64>, &'static str> {
        let lexicon = inputs.lexicon.expect("checked by assemble");
        Ok(Some(count_additives(&tree()?, lexicon) as f64))
    };
    Ok(match spec {
        FeatureSpec::Nutrients11 => record.panel.values().to_vec(),
        FeatureSpec::Nutrients11PlusAdditives => {
            let mut row = record.panel.values().to_vec();
            row.push(additives()?);
            row
        }
        FeatureSpec::IngredientCountOnly => vec![Some(count_ingredients(&tree()?) as f64)],
        FeatureSpec::AdditiveCountOnly => vec![additives()?],
        FeatureSpec::Embedding { .. } => {
            let table = inputs.embeddings.expect("checked by assemble");
            table.get(&record.id).ok_or("no_embedding")?.iter().map(|&v| Some(v)).collect()
        }
    })
}

/// Builds the feature matrix for `spec`. Rows come out sorted by id; rows
/// lacking a required input are reported in `dropped`.
pub fn assemble(table: &[ProductRecord], spec: &FeatureSpec, inputs: &Inputs<'_>) -> Result<Assembled, FeatureError> {
    if spec.needs_lexicon() && inputs.lexicon.is_none() {
        return Err(FeatureError::MissingInput("an additive lexicon"));
    }
    let dim = match (spec, inputs.embeddings) {
        (FeatureSpec::Embedding { .. }, None) => return Err(FeatureError::MissingInput("an embedding table")),
        (FeatureSpec::Embedding { dim: Some(d) }, Some(t)) if *d != t.dim() => {
            return Err(FeatureError::DimensionMismatch { expected: *d, found: t.dim() })
        }
        (_, Some(t)) => t.dim(),
        (_, None) => 0,
    };
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[a].id.cmp(&table[b].id).then(a.cmp(&b)));
    let rows: Vec<_> = order.par_iter().map(|&i| row_for(&table[i], spec, inputs)).collect();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = Vec::new();
    for (&i, row) in order.iter().zip(rows) {
        let record = &table[i];
        match row {
            Ok(row) => {
                ids.push(record.id.clone());
                values.push(row);
                labels.push(record.nova);
            }
            Err(reason) => dropped.push(DroppedRow { id: record.id.clone(), reason }),
        }
    }
    let matrix = FeatureMatrix::new(spec.schema(dim), ids, values)?;
    Ok(Assembled { matrix, labels, dropped })
}

/// Tally of drop reasons.
pub fn drop_summary(dropped: &[DroppedRow]) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for d in dropped {
        *m.entry(d.reason).or_insert(0) += 1;
    }
    m
}

/// Index of ids for quick lookups in callers that join on id.
pub fn id_index(matrix: &FeatureMatrix) -> HashMap<&str, usize> {
    matrix.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::NutrientPanel;
    use proptest::prelude::*;

    use crate::ingredients::tests::ONION_RINGS;

    fn cookie() -> ProductRecord {
        let mut r = ProductRecord::new("c1", "Chocolate chip cookies");
        r.ingredients_text = Some("wheat flour, sugar, cocoa butter, chocolate liquor".into());
        r.panel = NutrientPanel::default()
            .with(Nutrient::Carbohydrate, 50.0)
            .with(Nutrient::Protein, 5.0)
            .with(Nutrient::Fat, 10.0)
            .with(Nutrient::Fiber, 2.0);
        r
    }

    #[test]
    fn cookie_sentence() {
        assert_eq!(
            build_sentence(&cookie(), MissingNutrients::Omit).unwrap(),
            "Chocolate chip cookies has the ingredients: wheat flour, sugar, cocoa butter, chocolate liquor, and the nutrients: 5g of protein, 10g of fat, 50g of carbohydrates, 2g of fiber."
        );
    }

    #[test]
    fn sentence_placeholders_and_formatting() {
        let mut r = ProductRecord::new("x", "Plain");
        r.panel = NutrientPanel::default().with(Nutrient::Sugars, 3.410);
        let s = build_sentence(&r, MissingNutrients::Omit).unwrap();
        assert_eq!(s, "Plain has the ingredients: unknown, and the nutrients: 3.41g of sugars.");
        let s = build_sentence(&r, MissingNutrients::Placeholder).unwrap();
        assert!(s.contains("unknown of protein, unknown of fat"));
        assert!(s.ends_with("unknown of trans fat."));
        assert!(build_sentence(&ProductRecord::new("y", "  "), MissingNutrients::Omit).is_err());
        assert_eq!(format_grams(0.005), "0.01");
        assert_eq!(format_grams(2.0), "2");
        assert_eq!(format_grams(0.0), "0");
        assert_eq!(format_grams(12.5), "12.5");
    }

    fn onion_record() -> ProductRecord {
        let mut r = ProductRecord::new("onion", "Crispy Golden Onion Rings");
        r.ingredients_text = Some(ONION_RINGS.into());
        r.panel = NutrientPanel::default().with(Nutrient::Protein, 2.27).with(Nutrient::Fat, 11.36);
        r
    }

    #[test]
    fn onion_rings_feature_rows() {
        let lex = AdditiveLexicon::builtin();
        let inputs = Inputs { lexicon: Some(&lex), ..Default::default() };
        let a = assemble(&[onion_record()], &FeatureSpec::Nutrients11PlusAdditives, &inputs).unwrap();
        assert_eq!(a.matrix.n_features(), 12);
        assert_eq!(a.matrix.row(0)[11], Some(4.0));
        assert_eq!(a.matrix.row(0)[0], Some(2.27));
        let a = assemble(&[onion_record()], &FeatureSpec::IngredientCountOnly, &inputs).unwrap();
        assert_eq!(a.matrix.row(0), &[Some(19.0)]);
    }

    #[test]
    fn empty_table_and_missing_inputs() {
        let a = assemble(&[], &FeatureSpec::Nutrients11, &Inputs::default()).unwrap();
        assert!(a.matrix.is_empty() && a.labels.is_empty());
        assert_eq!(a.matrix.n_features(), 11);
        assert!(assemble(&[], &FeatureSpec::AdditiveCountOnly, &Inputs::default()).is_err());
        assert!(assemble(&[], &FeatureSpec::Embedding { dim: None }, &Inputs::default()).is_err());
    }

    #[test]
    fn embeddings_join_and_drop() {
        let mut t = EmbeddingTable::new(2);
        t.insert("b", vec![1.0, 2.0]).unwrap();
        let recs = [ProductRecord::new("b", "B"), ProductRecord::new("a", "A")];
        let inputs = Inputs { embeddings: Some(&t), ..Default::default() };
        let a = assemble(&recs, &FeatureSpec::Embedding { dim: None }, &inputs).unwrap();
        assert_eq!(a.matrix.ids(), ["b"]);
        assert_eq!(a.dropped, vec![DroppedRow { id: "a".into(), reason: "no_embedding" }]);
        assert!(matches!(
            assemble(&recs, &FeatureSpec::Embedding { dim: Some(3) }, &inputs),
            Err(FeatureError::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn embedding_file_errors() {
        let ok = "dim=4\nid,v0,v1,v2,v3\na,1,2,3,4\nb,0,0,0,0\nc,1e-3,2,3,4\n";
        assert_eq!(EmbeddingTable::read(ok.as_bytes()).unwrap().len(), 3);
        let ragged = "dim=4\nid,v0,v1,v2,v3\na,1,2,3,4\nb,1,2,3\n";
        assert!(matches!(EmbeddingTable::read(ragged.as_bytes()), Err(FeatureError::Embedding { line: 4, .. })));
        let dup = "dim=1\nid,v0\na,1\na,2\n";
        assert!(matches!(EmbeddingTable::read(dup.as_bytes()), Err(FeatureError::Embedding { line: 4, .. })));
        assert!(EmbeddingTable::read("id,v0\n".as_bytes()).is_err());
    }

    #[test]
    fn spec_names_round_trip() {
        for s in ["nutrients11", "nutrients11_plus_additives", "ingredient_count_only", "additive_count_only", "embedding", "embedding:768"] {
            assert_eq!(s.parse::<FeatureSpec>().unwrap().name(), s);
        }
        assert!("embedding:0".parse::<FeatureSpec>().is_err());
        assert!("nutrients12".parse::<FeatureSpec>().is_err());
    }

    proptest! {
        #[test]
        fn embedding_round_trip_is_exact(vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40)) {
            let mut t = EmbeddingTable::new(vals.len());
            t.insert("only", vals.clone()).unwrap();
            let mut buf = Vec::new();
            t.write(&mut buf).unwrap();
            let back = EmbeddingTable::read(buf.as_slice()).unwrap();
            let got = back.get("only").unwrap();
            prop_assert!(got.iter().zip(&vals).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn rows_plus_drops_equal_input(labels in prop::collection::vec(prop::option::of(1u8..=4), 0..30)) {
            let recs: Vec<ProductRecord> = labels.iter().enumerate().map(|(i, l)| {
                let mut r = ProductRecord::new(format!("p{i:03}"), "n");
                r.nova = l.map(|c| NovaClass::new(c).unwrap());
                r
            }).collect();
            let a = assemble(&recs, &FeatureSpec::Nutrients11, &Inputs { require_label: true, ..Default::default() }).unwrap();
            prop_assert_eq!(a.matrix.n_rows() + a.dropped.len(), recs.len());
            prop_assert!(a.matrix.ids().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
