//! Rule-based scorers: Nutri-Score and SIGA.
//!
//! Nutri-Score point ladders are configuration, not code. A [`PointTables`]
//! file maps each scale to per-component ladders of `[threshold, points]`
//! pairs: a value strictly above a threshold earns that entry's points, and a
//! value at or below the first threshold earns 0.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{NutrientPanel, ProductKind, ProductRecord};
use crate::nutrient::Nutrient;

/// Lowest and highest representable Nutri-Score (4 × 10 negative, 3 × 5 positive).
pub const MIN_SCORE: i32 = -15;
pub const MAX_SCORE: i32 = 40;
pub const NEGATIVE_CAP: u8 = 10;
pub const POSITIVE_CAP: u8 = 5;

/// Salt-equivalent per gram of sodium.
pub const SALT_PER_SODIUM: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("unscorable: missing {0}")]
    Unscorable(String),
    #[error("score {score} is outside the representable band [{min}, {max}]")]
    ScoreOutOfRange { score: i32, min: i32, max: i32 },
    #[error("invalid point tables: {0}")]
    InvalidTables(String),
    #[error("NOVA class must be in 1..=4, got {0}")]
    NovaDomain(u8),
    #[error("has_risk_mup is set without has_mup")]
    RiskWithoutMup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Food,
    FatsOilsNuts,
    Drink,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::Food, Scale::FatsOilsNuts, Scale::Drink];

    pub fn for_kind(kind: ProductKind) -> Self {
        match kind {
            ProductKind::Food => Scale::Food,
            ProductKind::Beverage => Scale::Drink,
            ProductKind::FatsOilsNuts => Scale::FatsOilsNuts,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Food => "food",
            Scale::FatsOilsNuts => "fats_oils_nuts",
            Scale::Drink => "drink",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Energy,
    Sugars,
    SaturatedFat,
    /// Saturated fat as a percentage of total fat (fats/oils/nuts scale).
    SaturatedFatRatio,
    Sodium,
    Fiber,
    Protein,
    FruitVeg,
}

impl Component {
    pub fn is_negative(self) -> bool {
        !matches!(self, Component::Fiber | Component::Protein | Component::FruitVeg)
    }

    pub fn cap(self) -> u8 {
        if self.is_negative() {
            NEGATIVE_CAP
        } else {
            POSITIVE_CAP
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Energy => "energy",
            Component::Sugars => "sugars",
            Component::SaturatedFat => "saturated_fat",
            Component::SaturatedFatRatio => "saturated_fat_ratio",
            Component::Sodium => "sodium",
            Component::Fiber => "fiber",
            Component::Protein => "protein",
            Component::FruitVeg => "fruit_veg",
        }
    }
}

/// `[threshold, points]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ladder(pub Vec<(f64, u8)>);

impl Ladder {
    pub fn points(&self, value: f64) -> u8 {
        self.0
            .iter()
            .take_while(|(threshold, _)| value > *threshold)
            .last()
            .map(|&(_, p)| p)
            .unwrap_or(0)
    }

    fn validate(&self, component: Component) -> Result<(), String> {
        let mut prev: Option<(f64, u8)> = None;
        for &(t, p) in &self.0 {
            if !t.is_finite() {
                return Err(format!("{}: non-finite threshold", component.as_str()));
            }
            if p > component.cap() {
                return Err(format!("{}: {p} points exceeds cap {}", component.as_str(), component.cap()));
            }
            if let Some((pt, pp)) = prev {
                if t <= pt {
                    return Err(format!("{}: thresholds must be strictly increasing", component.as_str()));
                }
                if p < pp {
                    return Err(format!("{}: points must not decrease", component.as_str()));
                }
            }
            prev = Some((t, p));
        }
        Ok(())
    }
}

pub type ScaleTable = BTreeMap<Component, Ladder>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTables {
    #[serde(default)]
    pub version: Option<String>,
    #[serde(flatten)]
    pub scales: BTreeMap<Scale, ScaleTable>,
}

impl PointTables {
    pub fn from_json(text: &str) -> Result<Self, ScoringError> {
        let tables: PointTables =
            serde_json::from_str(text).map_err(|e| ScoringError::InvalidTables(e.to_string()))?;
        tables.validate()?;
        Ok(tables)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScoringError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScoringError::InvalidTables(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Reference ladders shipped in `data/nutriscore_points_v1.json`.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/nutriscore_points_v1.json")).expect("builtin point tables are valid")
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        for (scale, table) in &self.scales {
            for (component, ladder) in table {
                ladder.validate(*component).map_err(|e| ScoringError::InvalidTables(format!("{}: {e}", scale.as_str())))?;
            }
            self.components(*scale)?;
        }
        Ok(())
    }

    /// The seven components in scoring order for a scale.
    fn components(&self, scale: Scale) -> Result<[(Component, &Ladder); 7], ScoringError> {
        let table = self
            .scales
            .get(&scale)
            .ok_or_else(|| ScoringError::InvalidTables(format!("no ladders for scale {}", scale.as_str())))?;
        let get = |c: Component| {
            table.get(&c).map(|l| (c, l)).ok_or_else(|| {
                ScoringError::InvalidTables(format!("{}: missing ladder {}", scale.as_str(), c.as_str()))
            })
        };
        let sat = match (table.contains_key(&Component::SaturatedFat), table.contains_key(&Component::SaturatedFatRatio)) {
            (true, false) => get(Component::SaturatedFat)?,
            (false, true) => get(Component::SaturatedFatRatio)?,
            _ => {
                return Err(ScoringError::InvalidTables(format!(
                    "{}: exactly one of saturated_fat / saturated_fat_ratio is required",
                    scale.as_str()
                )))
            }
        };
        Ok([
            get(Component::Energy)?,
            get(Component::Sugars)?,
            sat,
            get(Component::Sodium)?,
            get(Component::Fiber)?,
            get(Component::Protein)?,
            get(Component::FruitVeg)?,
        ])
    }
}

/// Inputs to the points computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutriScoreInput<'a> {
    pub panel: &'a NutrientPanel,
    /// kJ per 100 g.
    pub energy_kj: Option<f64>,
    /// Fruit/vegetable/legume share in [0, 1].
    pub fruit_veg_fraction: Option<f64>,
}

impl<'a> NutriScoreInput<'a> {
    pub fn from_record(record: &'a ProductRecord) -> Self {
        NutriScoreInput {
            panel: &record.panel,
            energy_kj: record.energy_kj,
            fruit_veg_fraction: record.fruit_veg_fraction,
        }
    }

    fn value(&self, component: Component) -> Result<f64, ScoringError> {
        let missing = || ScoringError::Unscorable(component.as_str().to_string());
        let nutrient = |n: Nutrient| self.panel.get(n).ok_or_else(missing);
        match component {
            Component::Energy => self.energy_kj.ok_or_else(missing),
            Component::Sugars => nutrient(Nutrient::Sugars),
            Component::SaturatedFat => nutrient(Nutrient::SaturatedFat),
            Component::SaturatedFatRatio => {
                let sat = nutrient(Nutrient::SaturatedFat)?;
                let fat = nutrient(Nutrient::Fat)?;
                Ok(if fat > 0.0 { 100.0 * sat / fat } else { 0.0 })
            }
            Component::Sodium => nutrient(Nutrient::Sodium),
            Component::Fiber => nutrient(Nutrient::Fiber),
            Component::Protein => nutrient(Nutrient::Protein),
            Component::FruitVeg => self.fruit_veg_fraction.ok_or_else(missing),
        }
    }
}

/// Negative (N) and positive (P) point sums.
pub fn nutriscore_points(input: &NutriScoreInput<'_>, tables: &PointTables, scale: Scale) -> Result<(u32, u32), ScoringError> {
    let mut n = 0u32;
    let mut p = 0u32;
    for (component, ladder) in tables.components(scale)? {
        let points = u32::from(ladder.points(input.value(component)?));
        if component.is_negative() {
            n += points;
        } else {
            p += points;
        }
    }
    Ok((n, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::A => "A",
            Label::B => "B",
            Label::C => "C",
            Label::D => "D",
            Label::E => "E",
        };
        f.write_str(s)
    }
}

/// Letter for a score on a scale. Water on the drink scale is always A.
pub fn nutriscore_label(score: i32, scale: Scale, is_water: bool) -> Result<Label, ScoringError> {
    if scale == Scale::Drink && is_water {
        return Ok(Label::A);
    }
    if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
        return Err(ScoringError::ScoreOutOfRange { score, min: MIN_SCORE, max: MAX_SCORE });
    }
    // Upper bound (inclusive) of each band, A first.
    let bounds: &[(i32, Label)] = match scale {
        Scale::Food => &[(0, Label::A), (2, Label::B), (10, Label::C), (18, Label::D), (40, Label::E)],
        Scale::FatsOilsNuts => &[(-6, Label::A), (2, Label::B), (10, Label::C), (18, Label::D), (40, Label::E)],
        Scale::Drink => &[(2, Label::B), (6, Label::C), (9, Label::D), (40, Label::E)],
    };
    Ok(bounds.iter().find(|(upper, _)| score <= *upper).map(|&(_, l)| l).expect("bands cover the range"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NutriScoreResult {
    pub n_points: u32,
    pub p_points: u32,
    pub score: i32,
    pub label: Label,
    pub scale: Scale,
}

/// Full Nutri-Score for a product, on the scale implied by its kind.
pub fn nutriscore(record: &ProductRecord, tables: &PointTables) -> Result<NutriScoreResult, ScoringError> {
    let scale = Scale::for_kind(record.kind);
    let (n_points, p_points) = nutriscore_points(&NutriScoreInput::from_record(record), tables, scale)?;
    let score = n_points as i32 - p_points as i32;
    let label = nutriscore_label(score, scale, record.is_water)?;
    Ok(NutriScoreResult { n_points, p_points, score, label, scale })
}

/// Salt, sugars and fat limits (g/100 g); a product is balanced when strictly below all three.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceThresholds {
    pub salt: f64,
    pub sugars: f64,
    pub fat: f64,
}

pub const FOOD_BALANCE: BalanceThresholds = BalanceThresholds { salt: 1.5, sugars: 12.5, fat: 17.5 };
pub const BEVERAGE_BALANCE: BalanceThresholds = BalanceThresholds { salt: 0.75, sugars: 6.25, fat: 8.75 };

pub fn balance_thresholds(kind: ProductKind) -> BalanceThresholds {
    match kind {
        ProductKind::Beverage => BEVERAGE_BALANCE,
        ProductKind::Food | ProductKind::FatsOilsNuts => FOOD_BALANCE,
    }
}

/// SIGA nutritional balance. Salt is derived from sodium.
pub fn siga_balance(panel: &NutrientPanel, kind: ProductKind) -> Result<bool, ScoringError> {
    let salt = panel.salt().ok_or_else(|| ScoringError::Unscorable("sodium".into()))?;
    let sugars = panel.get(Nutrient::Sugars).ok_or_else(|| ScoringError::Unscorable("sugars".into()))?;
    let fat = panel.get(Nutrient::Fat).ok_or_else(|| ScoringError::Unscorable("fat".into()))?;
    let t = balance_thresholds(kind);
    Ok(salt < t.salt && sugars < t.sugars && fat < t.fat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SigaInput {
    pub nova: u8,
    pub is_raw: bool,
    pub balanced: bool,
    pub has_mup: bool,
    pub has_risk_mup: bool,
}

/// Seven-class SIGA refinement of NOVA.
///
/// | NOVA | condition | class |
/// |---|---|---|
/// | 1 | raw | 1 |
/// | 1 | not raw | 2 |
/// | 2 | | 2 |
/// | 3 | balanced | 3 |
/// | 3 | imbalanced | 4 |
/// | 4 | risk MUP | 7 |
/// | 4 | balanced | 5 |
/// | 4 | imbalanced | 6 |
///
/// Any MUP promotes the product to NOVA 4 first.
pub fn siga_classify(input: &SigaInput) -> Result<u8, ScoringError> {
    if !(1..=4).contains(&input.nova) {
        return Err(ScoringError::NovaDomain(input.nova));
    }
    if input.has_risk_mup && !input.has_mup {
        return Err(ScoringError::RiskWithoutMup);
    }
    let nova = if input.has_mup { 4 } else { input.nova };
    Ok(match nova {
        1 if input.is_raw => 1,
        1 | 2 => 2,
        3 if input.balanced => 3,
        3 => 4,
        _ if input.has_risk_mup => 7,
        _ if input.balanced => 5,
        _ => 6,
    })
}

/// SIGA class for a record; requires its NOVA label and panel.
pub fn siga_for_record(record: &ProductRecord) -> Result<u8, ScoringError> {
    let nova = record.nova.ok_or_else(|| ScoringError::Unscorable("nova".into()))?;
    let balanced = siga_balance(&record.panel, record.kind)?;
    let has_mup = record.has_mup.unwrap_or(false) || record.has_risk_mup.unwrap_or(false);
    siga_classify(&SigaInput {
        nova: nova.get(),
        is_raw: record.is_raw.unwrap_or(false),
        balanced,
        has_mup,
        has_risk_mup: record.has_risk_mup.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_panel() -> NutrientPanel {
        NutrientPanel::complete([0.0; 11])
    }

    fn input(panel: &NutrientPanel) -> NutriScoreInput<'_> {
        NutriScoreInput { panel, energy_kj: Some(0.0), fruit_veg_fraction: Some(0.0) }
    }

    #[test]
    fn zero_panel_scores_zero() {
        let tables = PointTables::builtin();
        let panel = zero_panel();
        for scale in [Scale::Food, Scale::FatsOilsNuts] {
            assert_eq!(nutriscore_points(&input(&panel), &tables, scale).unwrap(), (0, 0));
        }
    }

    #[test]
    fn supplied_ladder_is_respected() {
        let ladder = |pairs: &[(f64, u8)]| Ladder(pairs.to_vec());
        let mut table = ScaleTable::new();
        for c in [Component::Energy, Component::SaturatedFat, Component::Sodium, Component::Fiber, Component::Protein, Component::FruitVeg] {
            table.insert(c, ladder(&[(1.0, 1)]));
        }
        table.insert(Component::Sugars, ladder(&[(4.5, 1), (9.0, 2)]));
        let tables = PointTables { version: None, scales: BTreeMap::from([(Scale::Food, table)]) };
        tables.validate().unwrap();
        let panel = zero_panel().with(Nutrient::Sugars, 5.0);
        assert_eq!(nutriscore_points(&input(&panel), &tables, Scale::Food).unwrap(), (1, 0));
        let panel = zero_panel().with(Nutrient::Sugars, 4.5);
        assert_eq!(nutriscore_points(&input(&panel), &tables, Scale::Food).unwrap(), (0, 0));
    }

    // Ladders evaluated by hand from the shipped reference config.
    #[test]
    fn reference_config_hand_worked() {
        let tables = PointTables::builtin();
        // Onion rings: energy 1000 kJ -> 2, sugars 3.41 -> 0, sat 1.7 -> 1, sodium 0.273 -> 3;
        // fiber 4.5 -> 4, protein 2.27 -> 1, fruit/veg 0.3 -> 0.
        let onion = NutrientPanel::complete([2.27, 11.36, 28.41, 3.41, 4.5, 0.045, 0.001, 0.273, 0.0, 1.7, 0.0]);
        let i = NutriScoreInput { panel: &onion, energy_kj: Some(1000.0), fruit_veg_fraction: Some(0.3) };
        assert_eq!(nutriscore_points(&i, &tables, Scale::Food).unwrap(), (6, 5));

        // Cola: energy 180 kJ -> 6, sugars 10.6 -> 8, sat 0, sodium 0.01 -> 0; no positives.
        let cola = zero_panel().with(Nutrient::Sugars, 10.6).with(Nutrient::Sodium, 0.01);
        let i = NutriScoreInput { panel: &cola, energy_kj: Some(180.0), fruit_veg_fraction: Some(0.0) };
        assert_eq!(nutriscore_points(&i, &tables, Scale::Drink).unwrap(), (14, 0));

        // Olive oil: energy 3700 -> 10, sugars 0, sat ratio 14/100 = 14% -> 1, sodium 0;
        // fiber 0, protein 0, fruit/veg 0.9 -> 5 (olives count as fruit).
        let oil = zero_panel().with(Nutrient::Fat, 100.0).with(Nutrient::SaturatedFat, 14.0);
        let i = NutriScoreInput { panel: &oil, energy_kj: Some(3700.0), fruit_veg_fraction: Some(0.9) };
        assert_eq!(nutriscore_points(&i, &tables, Scale::FatsOilsNuts).unwrap(), (11, 5));
    }

    #[test]
    fn missing_component_is_named() {
        let tables = PointTables::builtin();
        let panel = zero_panel();
        let i = NutriScoreInput { panel: &panel, energy_kj: None, fruit_veg_fraction: Some(0.0) };
        assert_eq!(nutriscore_points(&i, &tables, Scale::Food), Err(ScoringError::Unscorable("energy".into())));
        let mut panel = zero_panel();
        panel.set(Nutrient::Fiber, None);
        assert_eq!(
            nutriscore_points(&input(&panel), &tables, Scale::Food),
            Err(ScoringError::Unscorable("fiber".into()))
        );
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let bad = r#"{"food": {"energy": [[2, 1], [1, 2]]}}"#;
        assert!(PointTables::from_json(bad).is_err());
        let over_cap = r#"{"food": {"fiber": [[1, 6]]}}"#;
        assert!(PointTables::from_json(over_cap).is_err());
        let incomplete = r#"{"food": {"energy": [[1, 1]]}}"#;
        assert!(PointTables::from_json(incomplete).is_err());
    }

    #[test]
    fn label_bands() {
        assert_eq!(nutriscore_label(19, Scale::Food, false).unwrap(), Label::E);
        assert_eq!(nutriscore_label(-6, Scale::FatsOilsNuts, false).unwrap(), Label::A);
        assert_eq!(nutriscore_label(-5, Scale::FatsOilsNuts, false).unwrap(), Label::B);
        assert_eq!(nutriscore_label(5, Scale::Drink, false).unwrap(), Label::C);
        assert_eq!(nutriscore_label(5, Scale::Drink, true).unwrap(), Label::A);
        assert_eq!(nutriscore_label(-15, Scale::Drink, false).unwrap(), Label::B);
        assert!(matches!(nutriscore_label(41, Scale::Food, false), Err(ScoringError::ScoreOutOfRange { .. })));
        assert!(nutriscore_label(-16, Scale::Food, false).is_err());
    }

    #[test]
    fn labels_are_monotone() {
        for scale in Scale::ALL {
            let mut prev = Label::A;
            for s in MIN_SCORE..=MAX_SCORE {
                let l = nutriscore_label(s, scale, false).unwrap();
                assert!(l >= prev);
                prev = l;
            }
        }
    }

    #[test]
    fn balance_examples() {
        let panel = |salt: f64, sugars: f64, fat: f64| {
            zero_panel()
                .with(Nutrient::Sodium, salt / SALT_PER_SODIUM)
                .with(Nutrient::Sugars, sugars)
                .with(Nutrient::Fat, fat)
        };
        assert!(siga_balance(&panel(1.0, 10.0, 15.0), ProductKind::Food).unwrap());
        assert!(!siga_balance(&panel(1.6, 0.0, 0.0), ProductKind::Food).unwrap());
        assert!(!siga_balance(&panel(0.0, 6.3, 0.0), ProductKind::Beverage).unwrap());
        // Equality is imbalanced.
        assert!(!siga_balance(&panel(0.0, 12.5, 0.0), ProductKind::Food).unwrap());
        let mut missing = zero_panel();
        missing.set(Nutrient::Fat, None);
        assert_eq!(siga_balance(&missing, ProductKind::Food), Err(ScoringError::Unscorable("fat".into())));
    }

    #[test]
    fn siga_examples() {
        let base = SigaInput { nova: 4, is_raw: false, balanced: false, has_mup: true, has_risk_mup: true };
        assert_eq!(siga_classify(&base).unwrap(), 7);
        assert_eq!(siga_classify(&SigaInput { nova: 3, balanced: true, has_mup: false, has_risk_mup: false, ..base }).unwrap(), 3);
        assert_eq!(siga_classify(&SigaInput { nova: 1, is_raw: true, has_mup: false, has_risk_mup: false, ..base }).unwrap(), 1);
        // A single MUP promotes a NOVA 1 product.
        assert_eq!(siga_classify(&SigaInput { nova: 1, is_raw: true, balanced: true, has_mup: true, has_risk_mup: false }).unwrap(), 5);
        assert_eq!(siga_classify(&SigaInput { nova: 0, ..base }), Err(ScoringError::NovaDomain(0)));
        assert_eq!(siga_classify(&SigaInput { has_mup: false, ..base }), Err(ScoringError::RiskWithoutMup));
    }
}
