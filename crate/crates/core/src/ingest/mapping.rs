//! Column mapping and category-to-kind configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, ProductKind};
use crate::nutrient::Nutrient;

/// Non-nutrient canonical columns.
pub const ID: &str = "id";
pub const PRODUCT_NAME: &str = "product_name";
pub const INGREDIENTS_TEXT: &str = "ingredients_text";
pub const NOVA_GROUP: &str = "nova_group";
pub const CATEGORY: &str = "category";
pub const KIND: &str = "kind";
pub const ENERGY_KJ: &str = "energy_kj";
pub const FRUIT_VEG_FRACTION: &str = "fruit_veg_fraction";
pub const IS_WATER: &str = "is_water";
pub const IS_RAW: &str = "is_raw";
pub const HAS_MUP: &str = "has_mup";
pub const HAS_RISK_MUP: &str = "has_risk_mup";

/// Every canonical column, in the order they are written.
pub fn canonical_columns() -> Vec<&'static str> {
    let mut cols = vec![ID, PRODUCT_NAME, INGREDIENTS_TEXT, NOVA_GROUP];
    cols.extend(Nutrient::ALL.iter().map(|n| n.column()));
    cols.extend([
        CATEGORY,
        KIND,
        ENERGY_KJ,
        FRUIT_VEG_FRACTION,
        IS_WATER,
        IS_RAW,
        HAS_MUP,
        HAS_RISK_MUP,
    ]);
    cols
}

/// A source column, optionally rescaled into grams (e.g. `0.001` for mg).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnBinding {
    Name(String),
    Scaled { column: String, scale: f64 },
}

impl ColumnBinding {
    pub fn column(&self) -> &str {
        match self {
            ColumnBinding::Name(c) => c,
            ColumnBinding::Scaled { column, .. } => column,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            ColumnBinding::Name(_) => 1.0,
            ColumnBinding::Scaled { scale, .. } => *scale,
        }
    }
}

/// Binds canonical field names to source columns.
///
/// The JSON form is a flat object `{canonical_name: source_column}`; a value
/// may also be `{"column": ..., "scale": ...}`. Two reserved keys are
/// recognised: `delimiter` (a one-character string, default `,`) and
/// `reject_soft_warnings` (bool, default false). Canonical fields not listed
/// are bound to a same-named header column when one exists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<String>,
    #[serde(default)]
    pub reject_soft_warnings: bool,
    #[serde(flatten)]
    pub columns: BTreeMap<String, ColumnBinding>,
}

impl MappingConfig {
    /// Identity mapping over the canonical column names.
    pub fn canonical() -> Self {
        MappingConfig::default()
    }

    pub fn tsv() -> Self {
        MappingConfig { delimiter: Some("\t".into()), ..Default::default() }
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let mapping: MappingConfig =
            serde_json::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let known = canonical_columns();
        for (key, binding) in &self.columns {
            if !known.contains(&key.as_str()) {
                return Err(IngestError::Config(format!("unknown canonical field `{key}`")));
            }
            let scale = binding.scale();
            if !(scale.is_finite() && scale > 0.0) {
                return Err(IngestError::Config(format!("scale for `{key}` must be positive")));
            }
        }
        self.delimiter_byte().map(|_| ())
    }

    pub fn delimiter_byte(&self) -> Result<u8, IngestError> {
        match self.delimiter.as_deref() {
            None => Ok(b','),
            Some(d) if d.len() == 1 => Ok(d.as_bytes()[0]),
            Some("\\t") | Some("tab") => Ok(b'\t'),
            Some(d) => Err(IngestError::Config(format!("delimiter `{d}` must be one byte"))),
        }
    }

    /// Explicit binding for a canonical field, if any.
    pub fn binding(&self, canonical: &str) -> Option<&ColumnBinding> {
        self.columns.get(canonical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRule {
    /// Lowercase substring matched against the lowercased category.
    pub contains: String,
    pub kind: ProductKind,
}

/// Ordered category→kind rules; the first matching rule wins, and
/// categories with no match are [`ProductKind::Food`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindTable {
    pub rules: Vec<KindRule>,
}

impl KindTable {
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let mut table: KindTable =
            serde_json::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        for rule in &mut table.rules {
            rule.contains = rule.contains.to_lowercase();
        }
        Ok(table)
    }

    /// The table shipped in `data/category_kinds.json`.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../../data/category_kinds.json"))
            .expect("builtin category table is valid")
    }

    pub fn classify(&self, category: Option<&str>) -> ProductKind {
        let Some(category) = category else {
            return ProductKind::Food;
        };
        let lower = category.to_lowercase();
        self.rules
            .iter()
            .find(|r| lower.contains(&r.contains))
            .map(|r| r.kind)
            .unwrap_or(ProductKind::Food)
    }
}
