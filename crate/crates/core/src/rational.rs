//! Exact rational scalars.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(numer: i64, denom: i64) -> Q {
    Q::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parses `p`, `-p`, `p/q` or `-p/q`.
pub fn parse_q(text: &str) -> Option<Q> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().ok()?;
    let den: BigInt = den.parse().ok()?;
    if den.is_zero() {
        return None;
    }
    Some(Q::new(num, den))
}

/// Canonical `p/q` rendering (`p` when the denominator is one).
pub fn fmt_q(value: &Q) -> String {
    value.to_string()
}

pub fn abs(value: &Q) -> Q {
    value.abs()
}

/// Least non-negative integer `k` with `k >= value`.
pub fn ceil_nonneg(value: &Q) -> u64 {
    if value <= &Q::zero() {
        return 0;
    }
    let c = value.ceil().to_integer();
    u64::try_from(c).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_canonically() {
        assert_eq!(parse_q("-3/5"), Some(q(-3, 5)));
        assert_eq!(parse_q("6/10"), Some(q(3, 5)));
        assert_eq!(parse_q("2"), Some(int(2)));
        assert_eq!(parse_q("1/0"), None);
        assert_eq!(fmt_q(&q(2, 10)), "1/5");
        assert_eq!(fmt_q(&q(4, 2)), "2");
    }
}
