//! Numeric cell cleaning.

/// Result of cleaning one numeric cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cleaned {
    /// `None` for an empty or whitespace-only cell.
    pub value: Option<f64>,
    /// The cell used a decimal comma and was rewritten.
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumericError {
    #[error("`{0}` is not a number")]
    NotANumber(String),
    #[error("`{0}` is negative")]
    Negative(String),
}

/// True for `digits ',' digits` with no dot anywhere.
fn is_decimal_comma(s: &str) -> bool {
    match s.split_once(',') {
        Some((int, frac)) => {
            !int.is_empty()
                && !frac.is_empty()
                && int.bytes().all(|b| b.is_ascii_digit())
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

/// Parses a quantity cell.
///
/// Only cells matching the full pattern `digits,digits` are treated as decimal
/// commas; anything else containing a comma is a parse failure.
pub fn clean_numeric(raw: &str) -> Result<Cleaned, NumericError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(Cleaned { value: None, repaired: false });
    }
    let (text, repaired) = if is_decimal_comma(trimmed) {
        (trimmed.replacen(',', ".", 1), true)
    } else {
        (trimmed.to_string(), false)
    };
    // f64::from_str accepts "inf"/"nan"; restrict to plain decimal notation.
    if !text
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return Err(NumericError::NotANumber(raw.to_string()));
    }
    let value: f64 = text
        .parse()
        .map_err(|_| NumericError::NotANumber(raw.to_string()))?;
    if !value.is_finite() {
        return Err(NumericError::NotANumber(raw.to_string()));
    }
    if value < 0.0 {
        return Err(NumericError::Negative(raw.to_string()));
    }
    // Normalize -0.0.
    let value = if value == 0.0 { 0.0 } else { value };
    Ok(Cleaned { value: Some(value), repaired })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_comma_is_repaired() {
        let c = clean_numeric("3,41").unwrap();
        assert_eq!(c.value, Some(3.41));
        assert!(c.repaired);
    }

    #[test]
    fn canonical_and_empty_cells() {
        assert_eq!(clean_numeric("11.36").unwrap(), Cleaned { value: Some(11.36), repaired: false });
        assert_eq!(clean_numeric("").unwrap().value, None);
        assert_eq!(clean_numeric("   ").unwrap().value, None);
        assert_eq!(clean_numeric(" 0 ").unwrap().value, Some(0.0));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["abc", "1,2,3", "1,2.5", "1.234,5", ",5", "5,", "nan", "inf", "1 2", "12g"] {
            assert!(clean_numeric(bad).is_err(), "{bad} should fail");
        }
        assert_eq!(clean_numeric("-1"), Err(NumericError::Negative("-1".into())));
    }

    proptest! {
        #[test]
        fn comma_equals_dot(int in "[0-9]{1,6}", frac in "[0-9]{1,6}") {
            let comma = clean_numeric(&format!("{int},{frac}")).unwrap();
            let dot = clean_numeric(&format!("{int}.{frac}")).unwrap();
            prop_assert_eq!(comma.value, dot.value);
            prop_assert!(comma.repaired);
            prop_assert!(!dot.repaired);
        }
    }
}
