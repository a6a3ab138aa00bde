//! Loading, cleaning and filtering product dumps.
//!
//! Input files are delimiter-separated text with a header row. A
//! [`MappingConfig`] binds canonical fields to source columns so that
//! differently-named exports (Open Food Facts snapshots change their headers
//! over time) land in the same [`ProductRecord`] schema. Every rejected row and
//! every repaired cell is tallied in the [`IngestReport`].

mod mapping;
mod numeric;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

pub use mapping::{canonical_columns, ColumnBinding, KindRule, KindTable, MappingConfig};
pub use numeric::{clean_numeric, Cleaned, NumericError};

use crate::nova::NovaClass;
use crate::nutrient::Nutrient;

/// Tolerance (g/100 g) for the sugars/carbohydrate and fat-component checks.
pub const CONSISTENCY_TOLERANCE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mapped column `{column}` (for `{field}`) is not in the header")]
    MissingColumn { field: String, column: String },
}

/// Eleven nutrient quantities in grams per 100 g; `None` marks a missing value.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NutrientPanel {
    values: [Option<f64>; 11],
}

impl NutrientPanel {
    pub fn new(values: [Option<f64>; 11]) -> Self {
        NutrientPanel { values }
    }

    pub fn complete(values: [f64; 11]) -> Self {
        NutrientPanel { values: values.map(Some) }
    }

    pub fn get(&self, nutrient: Nutrient) -> Option<f64> {
        self.values[nutrient.index()]
    }

    pub fn set(&mut self, nutrient: Nutrient, value: Option<f64>) {
        self.values[nutrient.index()] = value;
    }

    pub fn with(mut self, nutrient: Nutrient, value: f64) -> Self {
        self.set(nutrient, Some(value));
        self
    }

    pub fn values(&self) -> &[Option<f64>; 11] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (Nutrient, Option<f64>)> + '_ {
        Nutrient::ALL.iter().map(move |&n| (n, self.get(n)))
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Salt equivalent of the sodium content (sodium × 2.5).
    pub fn salt(&self) -> Option<f64> {
        self.get(Nutrient::Sodium).map(|s| s * 2.5)
    }

    /// Soft consistency warnings; an empty list means the panel is coherent.
    pub fn consistency_warnings(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if let (Some(sugars), Some(carbs)) = (self.get(Nutrient::Sugars), self.get(Nutrient::Carbohydrate)) {
            if sugars > carbs + CONSISTENCY_TOLERANCE {
                out.push("sugars_exceed_carbohydrate");
            }
        }
        if let (Some(fat), Some(sat), Some(trans)) = (
            self.get(Nutrient::Fat),
            self.get(Nutrient::SaturatedFat),
            self.get(Nutrient::TransFat),
        ) {
            if sat + trans > fat + CONSISTENCY_TOLERANCE {
                out.push("fat_components_exceed_fat");
            }
        }
        out
    }
}

impl Serialize for NutrientPanel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(11))?;
        for (n, v) in self.iter() {
            map.serialize_entry(n.key(), &v)?;
        }
        map.end()
    }
}

/// Which Nutri-Score / SIGA scale applies to a product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    #[default]
    Food,
    Beverage,
    FatsOilsNuts,
}

impl ProductKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProductKind::Food => "food",
            ProductKind::Beverage => "beverage",
            ProductKind::FatsOilsNuts => "fats_oils_nuts",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "food" => Some(ProductKind::Food),
            "beverage" | "drink" => Some(ProductKind::Beverage),
            "fats_oils_nuts" => Some(ProductKind::FatsOilsNuts),
            _ => None,
        }
    }
}

impl fmt::Display for ProductKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One food product.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProductRecord {
    pub id: String,
    /// Empty when the source has no name.
    pub name: String,
    pub ingredients_text: Option<String>,
    pub panel: NutrientPanel,
    pub nova: Option<NovaClass>,
    pub kind: ProductKind,
    pub category: Option<String>,
    /// Energy in kJ per 100 g (Nutri-Score only).
    pub energy_kj: Option<f64>,
    /// Fruit/vegetable/legume share in [0, 1] (Nutri-Score only).
    pub fruit_veg_fraction: Option<f64>,
    pub is_water: bool,
    pub is_raw: Option<bool>,
    pub has_mup: Option<bool>,
    pub has_risk_mup: Option<bool>,
}

impl ProductRecord {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        ProductRecord { id: id.into(), name: name.into(), ..Default::default() }
    }
}

/// Why a row was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rejection {
    Arity,
    MissingId,
    DuplicateId,
    Parse,
    Range,
    Nova,
    Consistency,
}

impl Rejection {
    pub fn code(self) -> &'static str {
        match self {
            Rejection::Arity => "arity",
            Rejection::MissingId => "missing_id",
            Rejection::DuplicateId => "duplicate_id",
            Rejection::Parse => "parse",
            Rejection::Range => "range",
            Rejection::Nova => "nova",
            Rejection::Consistency => "consistency",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rejections: BTreeMap<String, usize>,
    pub repairs: BTreeMap<String, usize>,
    /// Soft warnings on kept (or, when configured, rejected) rows.
    pub warnings: BTreeMap<String, usize>,
}

impl IngestReport {
    pub fn rejected(&self) -> usize {
        self.rejections.values().sum()
    }

    fn bump(map: &mut BTreeMap<String, usize>, key: &str, by: usize) {
        if by > 0 {
            *map.entry(key.to_string()).or_insert(0) += by;
        }
    }
}

/// Column positions resolved against a concrete header.
#[derive(Debug, Default)]
struct ResolvedColumns {
    positions: BTreeMap<&'static str, (usize, f64)>,
}

impl ResolvedColumns {
    fn resolve(header: &csv::StringRecord, mapping: &MappingConfig) -> Result<Self, IngestError> {
        let index: BTreeMap<&str, usize> =
            header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let mut positions = BTreeMap::new();
        for field in canonical_columns() {
            match mapping.binding(field) {
                Some(binding) => {
                    let pos = index.get(binding.column()).copied().ok_or_else(|| IngestError::MissingColumn {
                        field: field.to_string(),
                        column: binding.column().to_string(),
                    })?;
                    positions.insert(field, (pos, binding.scale()));
                }
                None => {
                    if let Some(&pos) = index.get(field) {
                        positions.insert(field, (pos, 1.0));
                    }
                }
            }
        }
        if !positions.contains_key(mapping::ID) {
            return Err(IngestError::Config("no column bound to `id`".into()));
        }
        Ok(ResolvedColumns { positions })
    }

    fn text<'r>(&self, row: &'r csv::StringRecord, field: &str) -> Option<&'r str> {
        let &(pos, _) = self.positions.get(field)?;
        let v = row.get(pos)?.trim();
        (!v.is_empty()).then_some(v)
    }

    fn number(&self, row: &csv::StringRecord, field: &str, repairs: &mut usize) -> Result<Option<f64>, Rejection> {
        let Some(&(pos, scale)) = self.positions.get(field) else {
            return Ok(None);
        };
        match clean_numeric(row.get(pos).unwrap_or("")) {
            Ok(c) => {
                if c.repaired {
                    *repairs += 1;
                }
                Ok(c.value.map(|v| v * scale))
            }
            Err(NumericError::Negative(_)) => Err(Rejection::Range),
            Err(NumericError::NotANumber(_)) => Err(Rejection::Parse),
        }
    }

    fn flag(&self, row: &csv::StringRecord, field: &str) -> Result<Option<bool>, Rejection> {
        match self.text(row, field) {
            None => Ok(None),
            Some(v) => match v.to_lowercase().as_str() {
                "1" | "true" | "yes" | "y" => Ok(Some(true)),
                "0" | "false" | "no" | "n" => Ok(Some(false)),
                _ => Err(Rejection::Parse),
            },
        }
    }
}

#[derive(Debug)]
struct RowOutcome {
    result: Result<ProductRecord, Rejection>,
    repairs: usize,
    warnings: Vec<&'static str>,
}

fn parse_row(
    row: &csv::StringRecord,
    width: usize,
    cols: &ResolvedColumns,
    kinds: &KindTable,
    reject_soft: bool,
) -> RowOutcome {
    let mut repairs = 0;
    let mut warnings = Vec::new();
    let result = (|| {
        if row.len() != width {
            return Err(Rejection::Arity);
        }
        let id = cols.text(row, mapping::ID).ok_or(Rejection::MissingId)?;
        let mut record = ProductRecord::new(id, cols.text(row, mapping::PRODUCT_NAME).unwrap_or(""));
        record.ingredients_text = cols.text(row, mapping::INGREDIENTS_TEXT).map(str::to_string);

        let mut panel = NutrientPanel::default();
        let mut range_error = false;
        for n in Nutrient::ALL {
            let v = cols.number(row, n.column(), &mut repairs)?;
            if let Some(v) = v {
                if v > 100.0 {
                    range_error = true;
                }
            }
            panel.set(n, v);
        }
        if range_error {
            return Err(Rejection::Range);
        }
        record.panel = panel;

        record.nova = match cols.number(row, mapping::NOVA_GROUP, &mut repairs).map_err(|_| Rejection::Nova)? {
            None => None,
            Some(v) if v.fract() == 0.0 && (1.0..=4.0).contains(&v) => {
                Some(NovaClass::new(v as u8).expect("checked range"))
            }
            Some(_) => return Err(Rejection::Nova),
        };

        record.category = cols.text(row, mapping::CATEGORY).map(str::to_string);
        record.kind = match cols.text(row, mapping::KIND) {
            Some(k) => ProductKind::parse(k).ok_or(Rejection::Parse)?,
            None => kinds.classify(record.category.as_deref()),
        };
        record.energy_kj = cols.number(row, mapping::ENERGY_KJ, &mut repairs)?;
        record.fruit_veg_fraction = cols.number(row, mapping::FRUIT_VEG_FRACTION, &mut repairs)?;
        if matches!(record.fruit_veg_fraction, Some(f) if f > 1.0) {
            return Err(Rejection::Range);
        }
        record.is_water = cols.flag(row, mapping::IS_WATER)?.unwrap_or(false);
        record.is_raw = cols.flag(row, mapping::IS_RAW)?;
        record.has_mup = cols.flag(row, mapping::HAS_MUP)?;
        record.has_risk_mup = cols.flag(row, mapping::HAS_RISK_MUP)?;

        warnings = record.panel.consistency_warnings();
        if reject_soft && !warnings.is_empty() {
            return Err(Rejection::Consistency);
        }
        Ok(record)
    })();
    RowOutcome { result, repairs, warnings }
}

/// Options beyond the column mapping.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub kinds: KindTable,
}

impl LoadOptions {
    pub fn builtin() -> Self {
        LoadOptions { kinds: KindTable::builtin() }
    }
}

/// Reads a product table from any reader.
pub fn read_products<R: Read>(
    reader: R,
    mapping: &MappingConfig,
    options: &LoadOptions,
) -> Result<(Vec<ProductRecord>, IngestReport), IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter_byte()?)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let header = csv_reader.headers()?.clone();
    let cols = ResolvedColumns::resolve(&header, mapping)?;
    let rows: Vec<csv::StringRecord> = csv_reader.records().collect::<Result<_, _>>()?;

    let outcomes: Vec<RowOutcome> = rows
        .par_iter()
        .map(|row| parse_row(row, header.len(), &cols, &options.kinds, mapping.reject_soft_warnings))
        .collect();

    let mut report = IngestReport { rows_read: rows.len(), ..Default::default() };
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for outcome in outcomes {
        IngestReport::bump(&mut report.repairs, "decimal_comma", outcome.repairs);
        for w in &outcome.warnings {
            IngestReport::bump(&mut report.warnings, w, 1);
        }
        let result = outcome.result.and_then(|record| {
            if seen.insert(record.id.clone()) {
                Ok(record)
            } else {
                Err(Rejection::DuplicateId)
            }
        });
        match result {
            Ok(record) => records.push(record),
            Err(reason) => IngestReport::bump(&mut report.rejections, reason.code(), 1),
        }
    }
    report.rows_kept = records.len();
    Ok((records, report))
}

/// Loads a product table from a file.
pub fn load_products(
    path: &Path,
    mapping: &MappingConfig,
    options: &LoadOptions,
) -> Result<(Vec<ProductRecord>, IngestReport), IngestError> {
    let file = std::fs::File::open(path)
        .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    read_products(std::io::BufReader::new(file), mapping, options)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

/// The bundled 500-row sample corpus, in canonical columns.
pub const SAMPLE_CORPUS_CSV: &str = include_str!("../../data/sample_products.csv");

/// Loads [`SAMPLE_CORPUS_CSV`] with the canonical mapping and shipped kind rules.
pub fn sample_corpus() -> (Vec<ProductRecord>, IngestReport) {
    read_products(SAMPLE_CORPUS_CSV.as_bytes(), &MappingConfig::canonical(), &LoadOptions::builtin())
        .expect("bundled corpus parses")
}

/// Writes records as canonical CSV, readable back with [`MappingConfig::canonical`].
pub fn write_products<W: Write>(records: &[ProductRecord], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(canonical_columns())?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            r.name.clone(),
            r.ingredients_text.clone().unwrap_or_default(),
            r.nova.map(|n| n.to_string()).unwrap_or_default(),
        ];
        row.extend(r.panel.iter().map(|(_, v)| fmt_opt(v)));
        row.extend([
            r.category.clone().unwrap_or_default(),
            r.kind.as_str().to_string(),
            fmt_opt(r.energy_kj),
            fmt_opt(r.fruit_veg_fraction),
            fmt_flag(Some(r.is_water)),
            fmt_flag(r.is_raw),
            fmt_flag(r.has_mup),
            fmt_flag(r.has_risk_mup),
        ]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| IngestError::Io { path: "<output>".into(), source: e })?;
    Ok(())
}

/// A field that [`filter_complete`] can require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequiredField {
    Name,
    IngredientsText,
    Nova,
    Nutrient(Nutrient),
}

impl RequiredField {
    /// Name, ingredient list, NOVA label and the full 11-nutrient panel.
    pub fn case_study() -> Vec<RequiredField> {
        let mut v = vec![RequiredField::Name, RequiredField::IngredientsText, RequiredField::Nova];
        v.extend(Nutrient::ALL.iter().map(|&n| RequiredField::Nutrient(n)));
        v
    }

    fn present(self, r: &ProductRecord) -> bool {
        match self {
            RequiredField::Name => !r.name.trim().is_empty(),
            RequiredField::IngredientsText => r.ingredients_text.as_deref().is_some_and(|t| !t.trim().is_empty()),
            RequiredField::Nova => r.nova.is_some(),
            RequiredField::Nutrient(n) => r.panel.get(n).is_some(),
        }
    }
}

/// Keeps the rows having every required field, preserving order.
pub fn filter_complete(table: &[ProductRecord], required: &[RequiredField]) -> Vec<ProductRecord> {
    table
        .iter()
        .filter(|r| required.iter().all(|f| f.present(r)))
        .cloned()
        .collect()
}
