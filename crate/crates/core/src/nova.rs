use std::fmt;

use serde::{Deserialize, Serialize};

/// Simplex tolerance for probability vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A NOVA processing class, 1 (unprocessed) through 4 (ultra-processed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct NovaClass(u8);

impl NovaClass {
    pub const ALL: [NovaClass; 4] = [NovaClass(1), NovaClass(2), NovaClass(3), NovaClass(4)];

    pub fn new(class: u8) -> Result<Self, InvalidNovaClass> {
        if (1..=4).contains(&class) {
            Ok(NovaClass(class))
        } else {
            Err(InvalidNovaClass(i64::from(class)))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based position in probability and count vectors.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 4, "NOVA class index {index} out of range");
        NovaClass(index as u8 + 1)
    }
}

impl fmt::Display for NovaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u8> for NovaClass {
    type Error = InvalidNovaClass;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        NovaClass::new(value)
    }
}

impl From<NovaClass> for u8 {
    fn from(value: NovaClass) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("NOVA class must be in 1..=4, got {0}")]
pub struct InvalidNovaClass(pub i64);

/// A point on the 4-class probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct NovaProbabilities([f64; 4]);

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SimplexError {
    #[error("probability p{class} = {value} is outside [0, 1]")]
    OutOfRange { class: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    BadSum(f64),
}

impl NovaProbabilities {
    /// Validates that `p` lies on the simplex within [`SIMPLEX_TOLERANCE`].
    pub fn new(p: [f64; 4]) -> Result<Self, SimplexError> {
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SimplexError::OutOfRange { class: i + 1, value: v });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(SimplexError::BadSum(sum));
        }
        Ok(NovaProbabilities(p))
    }

    /// Normalizes a non-negative count or weight vector.
    pub fn from_counts(counts: [f64; 4]) -> Result<Self, SimplexError> {
        let total: f64 = counts.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(SimplexError::BadSum(total));
        }
        Self::new(counts.map(|c| c / total))
    }

    /// The vertex of a single class.
    pub fn certain(class: NovaClass) -> Self {
        let mut p = [0.0; 4];
        p[class.index()] = 1.0;
        NovaProbabilities(p)
    }

    pub fn uniform() -> Self {
        NovaProbabilities([0.25; 4])
    }

    pub fn get(&self, class: NovaClass) -> f64 {
        self.0[class.index()]
    }

    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    /// Most probable class; ties go to the lowest class.
    pub fn predict_class(&self) -> NovaClass {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        NovaClass::from_index(best)
    }
}

impl TryFrom<[f64; 4]> for NovaProbabilities {
    type Error = SimplexError;

    fn try_from(value: [f64; 4]) -> Result<Self, Self::Error> {
        NovaProbabilities::new(value)
    }
}

impl From<NovaProbabilities> for [f64; 4] {
    fn from(value: NovaProbabilities) -> Self {
        value.0
    }
}
