use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eleven nutrients of the branded-product panel, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nutrient {
    Protein,
    Fat,
    Carbohydrate,
    Sugars,
    Fiber,
    Calcium,
    Iron,
    Sodium,
    Cholesterol,
    SaturatedFat,
    TransFat,
}

impl Nutrient {
    pub const ALL: [Nutrient; 11] = [
        Nutrient::Protein,
        Nutrient::Fat,
        Nutrient::Carbohydrate,
        Nutrient::Sugars,
        Nutrient::Fiber,
        Nutrient::Calcium,
        Nutrient::Iron,
        Nutrient::Sodium,
        Nutrient::Cholesterol,
        Nutrient::SaturatedFat,
        Nutrient::TransFat,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short identifier, e.g. `saturated_fat`.
    pub fn key(self) -> &'static str {
        match self {
            Nutrient::Protein => "protein",
            Nutrient::Fat => "fat",
            Nutrient::Carbohydrate => "carbohydrate",
            Nutrient::Sugars => "sugars",
            Nutrient::Fiber => "fiber",
            Nutrient::Calcium => "calcium",
            Nutrient::Iron => "iron",
            Nutrient::Sodium => "sodium",
            Nutrient::Cholesterol => "cholesterol",
            Nutrient::SaturatedFat => "saturated_fat",
            Nutrient::TransFat => "trans_fat",
        }
    }

    /// Column name in the canonical product table, e.g. `saturated_fat_g`.
    pub fn column(self) -> &'static str {
        match self {
            Nutrient::Protein => "protein_g",
            Nutrient::Fat => "fat_g",
            Nutrient::Carbohydrate => "carbohydrate_g",
            Nutrient::Sugars => "sugars_g",
            Nutrient::Fiber => "fiber_g",
            Nutrient::Calcium => "calcium_g",
            Nutrient::Iron => "iron_g",
            Nutrient::Sodium => "sodium_g",
            Nutrient::Cholesterol => "cholesterol_g",
            Nutrient::SaturatedFat => "saturated_fat_g",
            Nutrient::TransFat => "trans_fat_g",
        }
    }

    /// Human-readable name used in generated sentences.
    pub fn display_name(self) -> &'static str {
        match self {
            Nutrient::Protein => "protein",
            Nutrient::Fat => "fat",
            Nutrient::Carbohydrate => "carbohydrates",
            Nutrient::Sugars => "sugars",
            Nutrient::Fiber => "fiber",
            Nutrient::Calcium => "calcium",
            Nutrient::Iron => "iron",
            Nutrient::Sodium => "sodium",
            Nutrient::Cholesterol => "cholesterol",
            Nutrient::SaturatedFat => "saturated fat",
            Nutrient::TransFat => "trans fat",
        }
    }
}

impl fmt::Display for Nutrient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown nutrient `{0}`")]
pub struct UnknownNutrient(pub String);

impl FromStr for Nutrient {
    type Err = UnknownNutrient;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Nutrient::ALL
            .into_iter()
            .find(|n| n.key() == s || n.column() == s)
            .ok_or_else(|| UnknownNutrient(s.to_string()))
    }
}
