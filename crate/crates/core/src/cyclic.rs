//! Three-point `Z/p^n`-covers `y^{p^n} = c x^a (x-1)^b`: normalization, tail
//! loci, stable graph, stable-model field tower and conductor verdict.

use num_bigint::BigInt;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::graph::GraphError;
use crate::ramification::RamificationError;
use crate::rat::{self, vp_int};
use crate::series::SeriesError;
use crate::tower::TowerError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("n must be at least 1")]
    BadLevel,
    #[error("cover is disconnected: fewer than two of a, b, a+b are prime to p")]
    Disconnected,
    #[error("not a three-point cover: ramification index above {0} is 1")]
    NotThreePoint(&'static str),
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Ramification(#[from] RamificationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Coordinate change applied during normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Swap {
    /// `x -> 1 - x`, exchanging the points 0 and 1.
    ZeroOne,
    /// `x -> x / (x - 1)`, exchanging the points 1 and ∞.
    OneInfinity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub p: u64,
    pub n: u32,
    #[serde(with = "bigint_str")]
    pub a: BigInt,
    #[serde(with = "bigint_str")]
    pub b: BigInt,
    /// `(a, b)` as given, before normalization.
    #[serde(with = "bigint_pair")]
    pub input: (BigInt, BigInt),
    /// Ramification indices above 0, 1, ∞ in the input coordinates, as exponents of `p`.
    pub index_exponents: [u32; 3],
    pub s: u32,
    pub normalization: Vec<Swap>,
}

impl CoverSpec {
    pub fn v_b(&self) -> u32 {
        self.n - self.s
    }

    pub fn pn(&self) -> BigInt {
        rat::ppow(self.p, self.n)
    }

    /// The quotient by the subgroup of order `p^j`: a `Z/p^{n-j}`-cover with
    /// the same exponents (not reduced mod `p^{n-j}`, so that tail centers of
    /// quotients are computed from one `(a, b)`).
    pub fn quotient(&self, j: u32) -> Result<CoverSpec, CoverError> {
        assert!(j < self.n, "quotient index must be below n");
        let mut q = branch_signature(self.p, self.n - j, &self.a, &self.b)?;
        q.a = self.a.clone();
        q.b = self.b.clone();
        Ok(q)
    }
}

fn v_capped(x: &BigInt, p: u64, n: u32) -> u32 {
    match vp_int(x, p) {
        None => n,
        Some(v) => (v as u32).min(n),
    }
}

/// Ramification data and normalization so that 0 and ∞ are totally ramified.
pub fn branch_signature(p: u64, n: u32, a: &BigInt, b: &BigInt) -> Result<CoverSpec, CoverError> {
    if !rat::is_prime(p) {
        return Err(CoverError::NotPrime(p));
    }
    if n == 0 {
        return Err(CoverError::BadLevel);
    }
    let ab = a + b;
    let va = v_capped(a, p, n);
    let vb = v_capped(b, p, n);
    let vab = v_capped(&ab, p, n);
    if [va, vb, vab].iter().filter(|&&v| v > 0).count() >= 2 {
        return Err(CoverError::Disconnected);
    }
    for (v, name) in [(va, "0"), (vb, "1"), (vab, "infinity")] {
        if v == n {
            return Err(CoverError::NotThreePoint(name));
        }
    }
    let mut na = a.clone();
    let mut nb = b.clone();
    let mut normalization = Vec::new();
    if va > 0 {
        std::mem::swap(&mut na, &mut nb);
        normalization.push(Swap::ZeroOne);
    } else if vab > 0 {
        nb = -(&na + &nb);
        normalization.push(Swap::OneInfinity);
    }
    let m = rat::ppow(p, n);
    na = na.mod_floor(&m);
    nb = nb.mod_floor(&m);
    let s = n - v_capped(&nb, p, n);
    Ok(CoverSpec {
        p,
        n,
        a: na,
        b: nb,
        input: (a.clone(), b.clone()),
        index_exponents: [n - va, n - vb, n - vab],
        s,
        normalization,
    })
}

pub(crate) mod bigint_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) mod bigint_pair {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &(BigInt, BigInt), s: S) -> Result<S::Ok, S::Error> {
        [x.0.to_string(), x.1.to_string()].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(BigInt, BigInt), D::Error> {
        let [a, b] = <[String; 2]>::deserialize(d)?;
        Ok((a.parse().map_err(serde::de::Error::custom)?, b.parse().map_err(serde::de::Error::custom)?))
    }
}

mod locus;

pub use locus::{
    center_label, certify_one_disk, certify_tail, classify_on_disk, cube_radicand, new_tail_locus, new_tail_radius,
    sqrt_one_mod_eight, CenterField, LocusDesc, NewTailLocus, TwoAdicData, MAX_TRUNCATION,
};

mod stable;

pub use stable::{
    build_stable_graph, inseparable_tails, lower_confidence, quotient_tail_radius, InseparableTail, TailCertificate,
    TailRole,
};

mod field;

pub use field::{
    conductor_bound, d_prime, dyadic_center, stab_field_tower, tower_case, valuation_facts, ConductorVerdict,
    TowerCase, ValuationFact,
};

mod report;

pub use report::{analyze, inseparable_tails_of, GraphChecks, StableModelReport};
