//! Exact rational helpers: p-adic valuations of integers and rationals,
//! falling-factorial binomials, and the `"num/den"` wire format.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qb(n: &BigInt) -> Q {
    Q::from_integer(n.clone())
}

/// `v_p(x)` for a nonzero integer; `None` for zero.
pub fn vp_int(x: &BigInt, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut x = x.abs();
    let mut k = 0;
    loop {
        let (d, r) = x.div_rem(&pb);
        if !r.is_zero() {
            return Some(k);
        }
        x = d;
        k += 1;
    }
}

pub fn vp(x: &Q, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    Some(vp_int(x.numer(), p).unwrap() - vp_int(x.denom(), p).unwrap())
}

/// Splits `x = p^k * u` with `v_p(u) = 0`.
pub fn split_unit(x: &Q, p: u64) -> (i64, Q) {
    let k = vp(x, p).expect("split_unit of zero");
    let pk = Q::from_integer(BigInt::from(p).pow(k.unsigned_abs() as u32));
    let u = if k >= 0 { x / pk } else { x * pk };
    (k, u)
}

pub fn pow_q(x: &Q, k: i64) -> Q {
    if k >= 0 {
        num_traits::pow(x.clone(), k as usize)
    } else {
        num_traits::pow(x.recip(), k.unsigned_abs() as usize)
    }
}

pub fn ppow(p: u64, k: u32) -> BigInt {
    BigInt::from(p).pow(k)
}

/// Falling-factorial binomial `x (x-1) ... (x-k+1) / k!`, exact for any integer `x`.
pub fn binom(x: &BigInt, k: usize) -> BigInt {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= x - BigInt::from(i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

/// Same, with a rational top argument.
pub fn binom_q(x: &Q, k: usize) -> Q {
    let mut acc = Q::one();
    for i in 0..k {
        acc = acc * (x - qi(i as i64)) / qi(i as i64 + 1);
    }
    acc
}

/// `v_p(k!)` by Legendre's formula.
pub fn vp_factorial(k: u64, p: u64) -> i64 {
    let mut s = 0;
    let mut t = k / p;
    while t > 0 {
        s += t as i64;
        t /= p;
    }
    s
}

pub fn floor_log(p: u64, x: u64) -> u32 {
    let mut k = 0;
    let mut acc = p;
    while acc <= x {
        k += 1;
        acc = acc.saturating_mul(p);
    }
    k
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn prime_factors(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= m {
        if m.is_multiple_of(d) {
            out.push(d);
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        return x.numer().to_string();
    }
    format!("{}/{}", x.numer(), x.denom())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as an exact rational")]
pub struct ParseRatError(pub String);

pub fn parse_q(s: &str) -> Result<Q, ParseRatError> {
    let t = s.trim();
    let bad = || ParseRatError(s.to_string());
    match t.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => BigInt::from_str(t).map(Q::from_integer).map_err(|_| bad()),
    }
}

pub fn floor_q(x: &Q) -> BigInt {
    x.floor().to_integer()
}

pub fn to_i64(x: &BigInt) -> Option<i64> {
    x.to_i64()
}

/// An exact valuation in units where `v(p) = 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatVal(pub Q);

impl RatVal {
    pub fn new(n: i64, d: i64) -> Self {
        RatVal(q(n, d))
    }

    pub fn int(n: i64) -> Self {
        RatVal(qi(n))
    }

    /// Value in units of a uniformizer of a field with ramification index `e` over the base.
    pub fn in_uniformizer_units(&self, e: u64) -> Q {
        &self.0 * qi(e as i64)
    }
}

impl fmt::Display for RatVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_q(&self.0))
    }
}

impl From<Q> for RatVal {
    fn from(x: Q) -> Self {
        RatVal(x)
    }
}

impl Serialize for RatVal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(&self.0))
    }
}

impl<'de> Deserialize<'de> for RatVal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map(RatVal).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for bare `Q` fields.
pub mod qser {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

pub mod qvec {
    use super::*;

    pub fn serialize<S: Serializer>(x: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = x.iter().map(fmt_q).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect()
    }
}

pub mod qopt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&fmt_q(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        let v = Option::<String>::deserialize(d)?;
        v.map(|s| parse_q(&s).map_err(serde::de::Error::custom)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuations() {
        assert_eq!(vp(&q(50, 3), 5), Some(2));
        assert_eq!(vp(&q(3, 25), 5), Some(-2));
        assert_eq!(vp(&qi(0), 5), None);
        assert_eq!(vp_factorial(25, 5), 6);
    }

    #[test]
    fn binomials_allow_negative_tops() {
        assert_eq!(binom(&BigInt::from(-3), 2), BigInt::from(6));
        assert_eq!(binom(&BigInt::from(10), 3), BigInt::from(120));
        assert_eq!(binom(&BigInt::from(2), 3), BigInt::zero());
    }

    #[test]
    fn wire_format_round_trips() {
        for x in [q(3, 13), q(-7, 2), qi(0), qi(5)] {
            assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
        }
        assert_eq!(parse_q("4").unwrap(), qi(4));
        assert!(parse_q("1/0").is_err());
    }
}
