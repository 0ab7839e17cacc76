use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::math::{cmp_products, mul_div_floor, mul_div_rem, MathError};

/// Non-negative exact rational, always kept in lowest terms.
///
/// Used for percentages (10%, 12.5%), TPS ratios, period fractions and ages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rate {
    num: u128,
    den: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error("rate denominator must be positive")]
    ZeroDenominator,
    #[error("cannot parse rate `{0}`")]
    Parse(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

impl Rate {
    pub const ZERO: Rate = Rate { num: 0, den: 1 };
    pub const ONE: Rate = Rate { num: 1, den: 1 };

    pub fn new(num: u128, den: u128) -> Result<Self, RateError> {
        if den == 0 {
            return Err(RateError::ZeroDenominator);
        }
        if num == 0 {
            return Ok(Self::ZERO);
        }
        let g = num.gcd(&den);
        Ok(Rate { num: num / g, den: den / g })
    }

    pub fn integer(n: u128) -> Self {
        Rate { num: n, den: 1 }
    }

    /// `p` percent, e.g. `percent(10)` is 1/10.
    pub fn percent(p: u128) -> Self {
        Rate::new(p, 100).expect("non-zero denominator")
    }

    pub fn numer(&self) -> u128 {
        self.num
    }

    pub fn denom(&self) -> u128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn checked_mul(self, rhs: Rate) -> Result<Rate, RateError> {
        // cross-cancel before multiplying to stay inside u128 as long as possible
        let g1 = self.num.gcd(&rhs.den).max(1);
        let g2 = rhs.num.gcd(&self.den).max(1);
        let num = (self.num / g1)
            .checked_mul(rhs.num / g2)
            .ok_or(MathError::Overflow)?;
        let den = (self.den / g2)
            .checked_mul(rhs.den / g1)
            .ok_or(MathError::Overflow)?;
        Rate::new(num, den)
    }

    pub fn checked_div(self, rhs: Rate) -> Result<Rate, RateError> {
        if rhs.num == 0 {
            return Err(MathError::DivisionByZero.into());
        }
        self.checked_mul(Rate { num: rhs.den, den: rhs.num })
    }

    pub fn checked_add(self, rhs: Rate) -> Result<Rate, RateError> {
        let g = self.den.gcd(&rhs.den);
        let l = self.den / g;
        let den = l.checked_mul(rhs.den).ok_or(MathError::Overflow)?;
        let a = self.num.checked_mul(rhs.den / g).ok_or(MathError::Overflow)?;
        let b = rhs.num.checked_mul(l).ok_or(MathError::Overflow)?;
        Rate::new(a.checked_add(b).ok_or(MathError::Overflow)?, den)
    }

    pub fn checked_sub(self, rhs: Rate) -> Result<Rate, RateError> {
        let g = self.den.gcd(&rhs.den);
        let l = self.den / g;
        let den = l.checked_mul(rhs.den).ok_or(MathError::Overflow)?;
        let a = self.num.checked_mul(rhs.den / g).ok_or(MathError::Overflow)?;
        let b = rhs.num.checked_mul(l).ok_or(MathError::Overflow)?;
        Rate::new(a.checked_sub(b).ok_or(MathError::Underflow)?, den)
    }

    /// `1 - self`, saturating at zero.
    pub fn complement(self) -> Rate {
        if self >= Rate::ONE {
            Rate::ZERO
        } else {
            Rate { num: self.den - self.num, den: self.den }
        }
    }

    pub fn min(self, other: Rate) -> Rate {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `floor(x * self)` for an integer `x`.
    pub fn apply_floor(&self, x: u128) -> Result<u128, MathError> {
        mul_div_floor(x, self.num, self.den)
    }

    /// Integer part.
    pub fn floor(&self) -> u128 {
        self.num / self.den
    }

    /// Renders `self * 100` with `decimals` fractional digits, rounding half to even.
    pub fn to_percent_string(&self, decimals: u32) -> String {
        format!("{}%", scaled_decimal(self.num, self.den, 100, decimals))
    }

    /// Decimal rendering with `decimals` fractional digits, rounding half to even.
    pub fn to_decimal_string(&self, decimals: u32) -> String {
        scaled_decimal(self.num, self.den, 1, decimals)
    }

    /// Lossy conversion for display and statistics only.
    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Rate {
    fn default() -> Self {
        Rate::ZERO
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_products(self.num, other.den, other.num, self.den)
    }
}

/// Exact decimal when the denominator is built from 2s and 5s (`0.08`),
/// otherwise `num/den`. Either form parses back to the same value.
impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            return write!(f, "{}", self.num);
        }
        if let Some(digits) = terminating_digits(self.den) {
            if let Ok((q, 0)) = 10u128.checked_pow(digits).ok_or(MathError::Overflow).and_then(|s| mul_div_rem(self.num, s, self.den)) {
                let scale = 10u128.pow(digits);
                return write!(f, "{}.{:0width$}", q / scale, q % scale, width = digits as usize);
            }
        }
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Fractional digits needed to write `1/den` exactly, if finitely many.
fn terminating_digits(mut den: u128) -> Option<u32> {
    let (mut twos, mut fives) = (0, 0);
    while den.is_multiple_of(2) {
        den /= 2;
        twos += 1;
    }
    while den.is_multiple_of(5) {
        den /= 5;
        fives += 1;
    }
    (den == 1).then_some(twos.max(fives))
}

/// Parses `"12.5%"`, `"1/8"`, `"0.125"` or `"3"`.
impl FromStr for Rate {
    type Err = RateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace('_', "");
        let bad = || RateError::Parse(s.to_string());
        if let Some(p) = t.strip_suffix('%') {
            let d = parse_decimal(p.trim()).ok_or_else(bad)?;
            return d.checked_mul(Rate::percent(1));
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: u128 = n.trim().parse().map_err(|_| bad())?;
            let d: u128 = d.trim().parse().map_err(|_| bad())?;
            return Rate::new(n, d);
        }
        parse_decimal(&t).ok_or_else(bad)
    }
}

fn scaled_decimal(num: u128, den: u128, factor: u128, decimals: u32) -> String {
    let scale = 10u128.pow(decimals);
    let (mut q, r) = mul_div_rem(num, factor * scale, den).expect("rendered value fits u128");
    match cmp_products(r, 2, den, 1) {
        Ordering::Greater => q += 1,
        Ordering::Equal if q % 2 == 1 => q += 1,
        _ => {}
    }
    let int = q / scale;
    let frac = q % scale;
    if decimals == 0 {
        format!("{int}")
    } else {
        format!("{int}.{frac:0width$}", width = decimals as usize)
    }
}

fn parse_decimal(s: &str) -> Option<Rate> {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if frac.len() > 30 {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: u128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    Rate::new(num, 10u128.checked_pow(frac.len() as u32)?).ok()
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
