use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::math::{mul_div_floor, MathError};
use crate::rate::Rate;

pub const DECIMALS: u32 = 18;
pub const ATOMS_PER_TOKEN: u128 = 1_000_000_000_000_000_000;

/// Quantity of the native token in atoms (10^-18 of one token).
///
/// All arithmetic is checked; there is no wrapping or saturating variant on
/// the ledger paths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenAmount(u128);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountError {
    #[error("cannot parse token amount `{0}`")]
    Parse(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

impl TokenAmount {
    pub const ZERO: TokenAmount = TokenAmount(0);
    pub const ONE_ATOM: TokenAmount = TokenAmount(1);

    pub const fn from_atoms(atoms: u128) -> Self {
        TokenAmount(atoms)
    }

    /// Whole tokens. Panics only on values beyond ~3.4e20 tokens.
    pub const fn from_tokens(tokens: u128) -> Self {
        match tokens.checked_mul(ATOMS_PER_TOKEN) {
            Some(a) => TokenAmount(a),
            None => panic!("token amount overflow"),
        }
    }

    pub const fn atoms(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: TokenAmount) -> Result<TokenAmount, MathError> {
        self.0.checked_add(rhs.0).map(TokenAmount).ok_or(MathError::Overflow)
    }

    pub fn checked_sub(self, rhs: TokenAmount) -> Result<TokenAmount, MathError> {
        self.0.checked_sub(rhs.0).map(TokenAmount).ok_or(MathError::Underflow)
    }

    pub fn saturating_sub(self, rhs: TokenAmount) -> TokenAmount {
        TokenAmount(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_mul(self, n: u128) -> Result<TokenAmount, MathError> {
        self.0.checked_mul(n).map(TokenAmount).ok_or(MathError::Overflow)
    }

    /// `floor(self * rate)`.
    pub fn mul_rate(self, rate: Rate) -> Result<TokenAmount, MathError> {
        rate.apply_floor(self.0).map(TokenAmount)
    }

    /// `floor(self * num / den)`.
    pub fn mul_div(self, num: u128, den: u128) -> Result<TokenAmount, MathError> {
        mul_div_floor(self.0, num, den).map(TokenAmount)
    }

    /// Exact ratio `self / rhs`.
    pub fn ratio(self, rhs: TokenAmount) -> Result<Rate, MathError> {
        Rate::new(self.0, rhs.0).map_err(|_| MathError::DivisionByZero)
    }

    /// Fixed form with all 18 fractional digits.
    pub fn to_fixed_string(self) -> String {
        format!(
            "{}.{:018}",
            self.0 / ATOMS_PER_TOKEN,
            self.0 % ATOMS_PER_TOKEN
        )
    }

    /// Whole-token value as f64; display and statistics only.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / ATOMS_PER_TOKEN as f64
    }
}

/// Canonical trimmed decimal: `194400000`, `0.0002`.
impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.0 / ATOMS_PER_TOKEN;
        let frac = self.0 % ATOMS_PER_TOKEN;
        if frac == 0 {
            write!(f, "{int}")
        } else {
            let digits = format!("{frac:018}");
            write!(f, "{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for TokenAmount {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AmountError::Parse(s.to_string());
        let t: String = s.trim().chars().filter(|c| *c != '_' && *c != ',').collect();
        let (int, frac) = t.split_once('.').unwrap_or((&t, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if frac.len() > DECIMALS as usize
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let whole: u128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_atoms: u128 = if frac.is_empty() {
            0
        } else {
            let padded = format!("{frac:0<18}");
            padded.parse().map_err(|_| bad())?
        };
        let atoms = whole
            .checked_mul(ATOMS_PER_TOKEN)
            .and_then(|w| w.checked_add(frac_atoms))
            .ok_or(AmountError::Math(MathError::Overflow))?;
        Ok(TokenAmount(atoms))
    }
}

impl Sum for TokenAmount {
    /// Panics on overflow; use `checked_add` folds on untrusted inputs.
    fn sum<I: Iterator<Item = TokenAmount>>(iter: I) -> Self {
        iter.fold(TokenAmount::ZERO, |a, b| a.checked_add(b).expect("token sum overflow"))
    }
}

impl Serialize for TokenAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TokenAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Signed atom count, used where supply can shrink (net growth under burning).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedTokenAmount(i128);

impl SignedTokenAmount {
    pub const ZERO: SignedTokenAmount = SignedTokenAmount(0);

    pub fn from_atoms(atoms: i128) -> Self {
        SignedTokenAmount(atoms)
    }

    /// `plus - minus`.
    pub fn difference(plus: TokenAmount, minus: TokenAmount) -> Result<Self, MathError> {
        let p = i128::try_from(plus.0).map_err(|_| MathError::Overflow)?;
        let m = i128::try_from(minus.0).map_err(|_| MathError::Overflow)?;
        Ok(SignedTokenAmount(p - m))
    }

    pub fn atoms(self) -> i128 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn magnitude(self) -> TokenAmount {
        TokenAmount(self.0.unsigned_abs())
    }
}

impl fmt::Display for SignedTokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 < 0 {
            write!(f, "-{}", self.magnitude())
        } else {
            write!(f, "{}", self.magnitude())
        }
    }
}

impl Serialize for SignedTokenAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let a: TokenAmount = "0.0002".parse().unwrap();
        assert_eq!(a.atoms(), 200_000_000_000_000);
        assert_eq!(a.to_string(), "0.0002");
        assert_eq!("10,000,000".parse::<TokenAmount>().unwrap(), TokenAmount::from_tokens(10_000_000));
        assert_eq!(TokenAmount::from_tokens(3).to_fixed_string(), "3.000000000000000000");
        assert_eq!(TokenAmount::from_atoms(1).to_string(), "0.000000000000000001");
        assert!("1.0000000000000000001".parse::<TokenAmount>().is_err());
        assert!("-5".parse::<TokenAmount>().is_err());
        assert!(".".parse::<TokenAmount>().is_err());
    }

    #[test]
    fn checked_arithmetic_errors() {
        let max = TokenAmount::from_atoms(u128::MAX);
        assert_eq!(max.checked_add(TokenAmount::ONE_ATOM), Err(MathError::Overflow));
        assert_eq!(TokenAmount::ZERO.checked_sub(TokenAmount::ONE_ATOM), Err(MathError::Underflow));
        assert_eq!(max.checked_mul(2), Err(MathError::Overflow));
    }

    #[test]
    fn signed_rendering() {
        let d = SignedTokenAmount::difference(TokenAmount::from_tokens(1), TokenAmount::from_tokens(3)).unwrap();
        assert!(d.is_negative());
        assert_eq!(d.to_string(), "-2");
    }
}
