//! Exact probabilities.
//!
//! Every probability in the crate is an arbitrary-precision rational. Text
//! forms are `"num/den"` (or a bare integer); exact decimal strings such as
//! `"0.75"` are also accepted on input.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Prob = BigRational;

pub fn prob(num: i64, den: i64) -> Prob {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Prob {
    Prob::zero()
}

pub fn one() -> Prob {
    Prob::one()
}

/// Parses `"3/4"`, `"1"`, `"-2"` or an exact decimal like `"0.125"`.
pub fn parse_prob(text: &str) -> Result<Prob, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty rational".into());
    }
    if let Some((int_part, frac_part)) = text.split_once('.') {
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
        if !digits_ok(int_digits) || !digits_ok(frac_part) || (int_digits.is_empty() && frac_part.is_empty()) {
            return Err(format!("malformed decimal `{text}`"));
        }
        let mantissa: BigInt = format!("{}{}", int_digits, frac_part)
            .parse()
            .unwrap_or_else(|_| BigInt::zero());
        let scale = num_traits::pow(BigInt::from(10), frac_part.len());
        let value = BigRational::new(mantissa, scale);
        return Ok(if negative { -value } else { value });
    }
    text.parse::<BigRational>()
        .map_err(|e| format!("malformed rational `{text}`: {e}"))
        .and_then(|r| {
            if r.denom().is_zero() {
                Err(format!("zero denominator in `{text}`"))
            } else {
                Ok(r)
            }
        })
}

/// Canonical text form: `"p/q"` in lowest terms, or an integer.
pub fn format_prob(p: &Prob) -> String {
    if p.is_integer() {
        p.numer().to_string()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

pub fn to_f64(p: &Prob) -> f64 {
    use num_traits::ToPrimitive;
    p.to_f64().unwrap_or(f64::NAN)
}

pub fn is_probability(p: &Prob) -> bool {
    !p.is_negative() && *p <= Prob::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_prob("3/4").unwrap(), prob(3, 4));
        assert_eq!(parse_prob("6/8").unwrap(), prob(3, 4));
        assert_eq!(parse_prob("0.75").unwrap(), prob(3, 4));
        assert_eq!(parse_prob("1").unwrap(), one());
        assert_eq!(parse_prob("-0.5").unwrap(), prob(-1, 2));
        assert_eq!(parse_prob(".04").unwrap(), prob(1, 25));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "abc", "1/0", "0.7.5", "1e-3"] {
            assert!(parse_prob(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn formats_lowest_terms() {
        assert_eq!(format_prob(&prob(6, 8)), "3/4");
        assert_eq!(format_prob(&prob(2, 1)), "2");
        assert_eq!(format_prob(&zero()), "0");
    }
}
