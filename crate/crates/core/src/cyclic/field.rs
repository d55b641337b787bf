//! Fields of definition of the stable model and their conductors.

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::locus::{cube_radicand, CenterField};
use super::{CoverError, CoverSpec};
use crate::ramification::{ConductorReport, FieldTower, RadicandDesc, TowerStep};
use crate::rat::{self, fmt_q, pow_q, q, qb, qi, Q};
use crate::tower::{make_tower, square_class_k2_k3, Elem};

/// Which shape of field the stable model needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerCase {
    /// `s = n`: tame over `K_n`.
    FullBranch,
    /// `p > 3`, `s < n`.
    PartialBranch,
    /// `p = 3`, `s = 1 < n`.
    CubeRootOne,
    /// `p = 3`, `1 < s < n`.
    CubeRootHigher,
    /// `p = 2`, `s < n`.
    Dyadic,
}

pub fn tower_case(spec: &CoverSpec) -> TowerCase {
    match (spec.p, spec.s == spec.n) {
        (_, true) => TowerCase::FullBranch,
        (2, _) => TowerCase::Dyadic,
        (3, _) if spec.s == 1 => TowerCase::CubeRootOne,
        (3, _) => TowerCase::CubeRootHigher,
        _ => TowerCase::PartialBranch,
    }
}

fn a_over_ab(spec: &CoverSpec) -> Q {
    Q::new(spec.a.clone(), &spec.a + &spec.b)
}

/// `K_k(u^{1/p^k})`; its compositum with `K_n` is `K_n(u^{1/p^k})`.
fn kummer(p: u64, k: u32, over: Option<usize>, radicand: RadicandDesc) -> Option<TowerStep> {
    kummer_at(p, k, k, over, radicand)
}

fn kummer_at(p: u64, k: u32, level: u32, over: Option<usize>, radicand: RadicandDesc) -> Option<TowerStep> {
    (k > 0).then(|| TowerStep::Kummer { degree: p.pow(k), level, over, radicand, conductor: None })
}

fn rational(x: Q, label: String) -> RadicandDesc {
    RadicandDesc::Rational { value: x, label }
}

/// `d' = a/(a+b) + ∛R'/(a+b)` with `R' = 3^{2(n-s+1)+1} C(b,3)`, in `Q(∛R')`.
pub fn d_prime(spec: &CoverSpec) -> Result<(Q, Elem), CoverError> {
    let r = cube_radicand(spec.n - spec.s + 1, &spec.b);
    let t = make_tower(3, &[(3, r.clone())])?;
    let ab = &spec.a + &spec.b;
    let d = &Elem::from_q(&t, a_over_ab(spec)) + &Elem::generator(&t, 0).scale(&Q::new(BigInt::one(), ab));
    Ok((r, d))
}

/// The radicand `d'^a (d'-1)^b / (a^a b^b (a+b)^{-(a+b)})` of case (iv).
fn d_prime_radicand(spec: &CoverSpec, d: &Elem) -> Elem {
    let t = &d.tower;
    let (a, b) = (&spec.a, &spec.b);
    let ab = a + b;
    let ai = i64::try_from(a).expect("small exponent");
    let bi = i64::try_from(b).expect("small exponent");
    let abi = ai + bi;
    let norm = &(&pow_q(&qb(a), ai) * &pow_q(&qb(b), bi)) * &pow_q(&qb(&ab), -abi);
    let num = &d.pow(ai) * &(d - &Elem::one(t)).pow(bi);
    num.scale(&(Q::one() / norm))
}

/// The `p = 2` center `d_j` in the smallest field containing it, and `ℓ(j)`.
pub fn dyadic_center(spec: &CoverSpec, j: u32) -> Result<(Elem, u32), CoverError> {
    let f = CenterField::new(spec, &[j], false)?;
    let d = f.center(spec, j)?;
    let level = if (spec.s + j) % 2 == 1 { 2 } else { 3 };
    Ok((d, level))
}

/// A field over which the stable model is defined, up to a tame extension.
pub fn stab_field_tower(spec: &CoverSpec) -> Result<FieldTower, CoverError> {
    let (p, n, s) = (spec.p, spec.n, spec.s);
    let mut steps = vec![TowerStep::Cyclotomic { level: n, conductor: None }];
    let d_label = format!("{}/{}", spec.a, &spec.a + &spec.b);
    match tower_case(spec) {
        TowerCase::FullBranch => {}
        TowerCase::PartialBranch => {
            steps.extend(kummer(p, n - s, None, rational(a_over_ab(spec), d_label)));
        }
        TowerCase::CubeRootOne => {
            let r = cube_radicand(n, &spec.b);
            let label = format!("3^{} * C({}, 3)", 2 * n + 1, spec.b);
            steps.extend(kummer(3, 1, None, rational(r, label)));
            steps.extend(kummer(3, n - 1, None, rational(a_over_ab(spec), d_label)));
        }
        TowerCase::CubeRootHigher => {
            let (r, d) = d_prime(spec)?;
            let label = format!("3^{} * C({}, 3)", 2 * (n - s + 1) + 1, spec.b);
            // Over K_{n-s+1}, so the last step's base has the roots of unity it needs.
            steps.extend(kummer_at(3, 1, n - s + 1, None, rational(r, label)));
            let over = steps.len() - 1;
            steps.extend(kummer(3, n - s, None, rational(a_over_ab(spec), d_label)));
            let u = d_prime_radicand(spec, &d);
            steps.extend(kummer(
                3,
                n - s + 1,
                Some(over),
                RadicandDesc::from_elem(&u, 0, "d'^a (d'-1)^b / (a^a b^b (a+b)^-(a+b))"),
            ));
        }
        TowerCase::Dyadic => {
            for j in 0..s {
                let (d, level) = dyadic_center(spec, j)?;
                let dm1 = &d - &Elem::one(&d.tower);
                let top = if j == 0 { n - 1 } else { n - j };
                steps.extend(kummer(2, top, None, RadicandDesc::from_elem(&d, level, &format!("d_{j}"))));
                steps.extend(kummer(
                    2,
                    s - j - u32::from(j == 0),
                    None,
                    RadicandDesc::from_elem(&dm1, level, &format!("d_{j} - 1")),
                ));
            }
        }
    }
    steps.push(TowerStep::Tame { conductor: None });
    Ok(FieldTower { prime: p, n, steps })
}

/// A valuation identity the conductor argument depends on, checked exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationFact {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub holds: bool,
}

impl ValuationFact {
    fn new(name: impl Into<String>, expected: Q, actual: Option<Q>) -> Self {
        let holds = actual.as_ref() == Some(&expected);
        ValuationFact {
            name: name.into(),
            expected: fmt_q(&expected),
            actual: actual.map_or_else(|| "inf".to_string(), |x| fmt_q(&x)),
            holds,
        }
    }

    fn flag(name: impl Into<String>, expected: bool, actual: bool) -> Self {
        ValuationFact {
            name: name.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
            holds: expected == actual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConductorVerdict {
    pub vanishes_at_n: bool,
    pub report: ConductorReport,
    pub facts: Vec<ValuationFact>,
}

/// The valuation facts behind the conductor bound of `spec`'s tower.
pub fn valuation_facts(spec: &CoverSpec) -> Result<Vec<ValuationFact>, CoverError> {
    let (p, n, s) = (spec.p, spec.n as i64, spec.s as i64);
    let vq = |x: &Q| rat::vp(x, p).map(qi);
    let mut facts = vec![ValuationFact::new("v(b)", qi(n - s), vq(&qb(&spec.b)))];
    let one_minus = |x: &Elem| x - &Elem::one(&x.tower);
    match tower_case(spec) {
        TowerCase::FullBranch => {}
        TowerCase::PartialBranch => {
            facts.push(ValuationFact::new("v(a/(a+b))", qi(0), vq(&a_over_ab(spec))));
        }
        TowerCase::CubeRootOne => {
            let r = cube_radicand(spec.n, &spec.b);
            facts.push(ValuationFact::new("v(3^(2n+1) C(b,3))", qi(3 * n - 1), vq(&r)));
        }
        TowerCase::CubeRootHigher => {
            let (r, d) = d_prime(spec)?;
            let m = n - s + 1;
            facts.push(ValuationFact::new("v(3^(2(n-s+1)+1) C(b,3))", qi(3 * m - 1), vq(&r)));
            let ratio = d.scale(&(Q::one() / a_over_ab(spec)));
            facts.push(ValuationFact::new("v(d'(a+b)/a - 1)", qi(n - s) + q(2, 3), one_minus(&ratio).val()));
            facts.push(ValuationFact::new("v(d' - 1)", qi(n - s), one_minus(&d).val()));
        }
        TowerCase::Dyadic => {
            for j in 0..spec.s {
                let (d, level) = dyadic_center(spec, j)?;
                let ratio = d.scale(&(Q::one() / a_over_ab(spec)));
                facts.push(ValuationFact::new(format!("v(d_{j} - 1)"), qi(n - s), one_minus(&d).val()));
                facts.push(ValuationFact::new(
                    format!("v(d_{j}(a+b)/a - 1)"),
                    qi(n) - q(s + j as i64, 2),
                    one_minus(&ratio).val(),
                ));
                // ℓ(j) from the square class of 2^{n-j} b i.
                let x = qb(&(rat::ppow(2, spec.n - j) * &spec.b));
                let sq = square_class_k2_k3(2, &x, 1)?;
                facts.push(ValuationFact::flag(
                    format!("sqrt(2^(n-j) b i) in K_2 for j = {j}"),
                    level == 2,
                    sq.di_square_in_k2,
                ));
                facts.push(ValuationFact::flag(
                    format!("sqrt(2^(n-j) b i) in K_3 for j = {j}"),
                    true,
                    sq.di_square_in_k3,
                ));
            }
        }
    }
    Ok(facts)
}

/// Conductor of the Galois closure of `tower` over `K_0`, with the valuation
/// facts for `spec`; fails if any fact does not hold.
pub fn conductor_bound(spec: &CoverSpec, tower: &FieldTower) -> Result<ConductorVerdict, CoverError> {
    let facts = valuation_facts(spec)?;
    if let Some(f) = facts.iter().find(|f| !f.holds) {
        return Err(CoverError::CertificationFailed(format!(
            "{}: expected {}, found {}",
            f.name, f.expected, f.actual
        )));
    }
    let (_, report) = tower.annotated()?;
    Ok(ConductorVerdict { vanishes_at_n: report.vanishes_at_n, report, facts })
}
