//! Wide integer helpers shared by the fixed-point and rational types.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MathError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("arithmetic underflow")]
    Underflow,
    #[error("division by zero")]
    DivisionByZero,
}

/// `floor(a * b / c)` without intermediate overflow.
pub fn mul_div_floor(a: u128, b: u128, c: u128) -> Result<u128, MathError> {
    if c == 0 {
        return Err(MathError::DivisionByZero);
    }
    if let Some(p) = a.checked_mul(b) {
        return Ok(p / c);
    }
    let wide = BigUint::from(a) * BigUint::from(b) / BigUint::from(c);
    wide.to_u128().ok_or(MathError::Overflow)
}

/// `floor(a * b / c)` together with the remainder `(a * b) mod c`.
pub fn mul_div_rem(a: u128, b: u128, c: u128) -> Result<(u128, u128), MathError> {
    if c == 0 {
        return Err(MathError::DivisionByZero);
    }
    if let Some(p) = a.checked_mul(b) {
        return Ok((p / c, p % c));
    }
    let prod = BigUint::from(a) * BigUint::from(b);
    let c = BigUint::from(c);
    let q = (&prod / &c).to_u128().ok_or(MathError::Overflow)?;
    let r = (prod % c).to_u128().expect("remainder below u128 divisor");
    Ok((q, r))
}

/// Compares `a * b` against `c * d` exactly.
pub fn cmp_products(a: u128, b: u128, c: u128, d: u128) -> std::cmp::Ordering {
    match (a.checked_mul(b), c.checked_mul(d)) {
        (Some(l), Some(r)) => l.cmp(&r),
        _ => (BigUint::from(a) * BigUint::from(b)).cmp(&(BigUint::from(c) * BigUint::from(d))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_div_small_and_wide() {
        assert_eq!(mul_div_floor(10, 3, 4).unwrap(), 7);
        let big = u128::MAX / 2;
        assert_eq!(mul_div_floor(big, 4, 4).unwrap(), big);
        assert_eq!(mul_div_floor(u128::MAX, 2, 1), Err(MathError::Overflow));
        assert_eq!(mul_div_floor(1, 1, 0), Err(MathError::DivisionByZero));
    }

    #[test]
    fn remainder_matches_wide_path() {
        let a = u128::MAX / 3;
        let (q, r) = mul_div_rem(a, 7, 11).unwrap();
        let back = BigUint::from(q) * 11u32 + BigUint::from(r);
        assert_eq!(back, BigUint::from(a) * 7u32);
    }

    #[test]
    fn product_comparison() {
        use std::cmp::Ordering::*;
        assert_eq!(cmp_products(2, 3, 3, 2), Equal);
        assert_eq!(cmp_products(u128::MAX, 2, u128::MAX, 3), Less);
    }
}
