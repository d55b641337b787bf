//! Tail centers in exact towers and the series certificates on their disks.

use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{CoverError, CoverSpec};
use crate::config::RunConfig;
use crate::rat::{self, fmt_q, q, qb, qi, RatVal, Q};
use crate::series::{classify_torsor_reduction, expand_disk_raw, ReductionVerdict, SeriesError};
use crate::tower::{cyclotomic_tower, make_tower, Elem, Tower, TowerDesc};

/// Largest truncation tried before giving up on bounding the series tail.
pub const MAX_TRUNCATION: usize = 512;

/// 2-adic digits kept in the approximation of `√w` (see [`TwoAdicData`]).
const SQRT_DIGITS_EXTRA: u32 = 24;

/// For `p = 2`: `b = 2^{n-s} σ 5^t u²` with `σ = ±1`, `t ∈ {0, 1}`, `u` a 2-adic unit.
///
/// `u` is a truncation of a 2-adic square root; the disks it is used in are
/// far wider than the truncation error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoAdicData {
    pub sigma: i64,
    pub t: u32,
    pub u: BigInt,
}

impl TwoAdicData {
    pub fn new(b: &BigInt, n: u32, s: u32) -> Self {
        let odd = b / rat::ppow(2, n - s);
        let four = BigInt::from(4);
        let sigma = if odd.mod_floor(&four).is_one() { 1 } else { -1 };
        let w: BigInt = &odd * BigInt::from(sigma);
        let t = if w.mod_floor(&BigInt::from(8)).is_one() { 0 } else { 1 };
        let digits = 2 * n + SQRT_DIGITS_EXTRA;
        let m = rat::ppow(2, digits);
        let x = if t == 0 {
            w.mod_floor(&m)
        } else {
            let inv5 = BigInt::from(5).modinv(&m).expect("5 is a unit mod 2^k");
            (&w * inv5).mod_floor(&m)
        };
        TwoAdicData { sigma, t, u: sqrt_one_mod_eight(&x, digits) }
    }
}

/// A square root mod `2^k` of `x ≡ 1 (mod 8)`.
pub fn sqrt_one_mod_eight(x: &BigInt, k: u32) -> BigInt {
    assert!(x.mod_floor(&BigInt::from(8)).is_one(), "needs x ≡ 1 mod 8");
    let mut u = BigInt::one();
    for j in 3..k {
        let m = rat::ppow(2, j + 1);
        if !(&u * &u - x).mod_floor(&m).is_zero() {
            u += rat::ppow(2, j - 1);
        }
    }
    u
}

/// An exact field containing the tail centers of a cover and of its
/// quotients, optionally with an element of the valuation needed to scale
/// the new-tail disk.
#[derive(Debug, Clone)]
pub struct CenterField {
    pub tower: Arc<Tower>,
    p: u64,
    cube: Option<(Q, Elem)>,
    i: Option<Elem>,
    zeta: Option<Elem>,
    sqrt5: Option<Elem>,
    uniformizer: Option<Elem>,
    two: Option<TwoAdicData>,
}

/// The radicand `3^{2m+1} C(b, 3)` of the `p = 3` centers for a level-`m` cover.
pub fn cube_radicand(m: u32, b: &BigInt) -> Q {
    qb(&(rat::ppow(3, 2 * m + 1) * rat::binom(b, 3)))
}

/// Whether the level-`k` quotient's new-tail center needs the cube root (`p = 3`, `n' > s' = 1`).
fn needs_cube(spec: &CoverSpec, k: u32) -> bool {
    spec.p == 3 && spec.s - k == 1 && spec.n - k > 1
}

/// Whether the level-`k` quotient's center for `p = 2` needs `ζ_8` (even `2n - s - k`).
fn needs_zeta(spec: &CoverSpec, k: u32) -> bool {
    (2 * spec.n - spec.s - k).is_multiple_of(2)
}

impl CenterField {
    /// Field for the centers of the quotients at levels `ks`; `scaled` adds
    /// the uniformizer step needed for the new-tail radius.
    pub fn new(spec: &CoverSpec, ks: &[u32], scaled: bool) -> Result<Self, CoverError> {
        let p = spec.p;
        let mut f = CenterField {
            tower: Tower::base(p)?,
            p,
            cube: None,
            i: None,
            zeta: None,
            sqrt5: None,
            uniformizer: None,
            two: None,
        };
        if p == 2 {
            let two = TwoAdicData::new(&spec.b, spec.n, spec.s);
            let zeta = ks.iter().any(|&k| needs_zeta(spec, k));
            let mut t = if zeta { cyclotomic_tower(2, 3)? } else { make_tower(2, &[(2, qi(-1))])? };
            if two.t == 1 {
                // φ² + φ - 1 = 0, so √5 = 2φ + 1; the step is unramified.
                t = t.adjoin_poly("phi", &[Elem::from_int(&t, -1), Elem::from_int(&t, 1)])?;
            }
            let g = Elem::generator(&t, 0);
            if zeta {
                f.i = Some(&g * &g);
                f.zeta = Some(g);
            } else {
                f.i = Some(g);
            }
            if two.t == 1 {
                let phi = Elem::generator(&t, 1);
                f.sqrt5 = Some(&phi.scale(&qi(2)) + &Elem::one(&t));
            }
            f.tower = t;
            f.two = Some(two);
            return Ok(f);
        }
        let mut steps: Vec<(usize, Q)> = Vec::new();
        if scaled {
            steps.push((2 * (p as usize - 1), qi(p as i64)));
        }
        let cube_k = ks.iter().copied().find(|&k| needs_cube(spec, k));
        if let Some(k) = cube_k {
            steps.push((3, cube_radicand(spec.n - k, &spec.b)));
        }
        let t = make_tower(p, &steps)?;
        if scaled {
            f.uniformizer = Some(Elem::generator(&t, 0));
        }
        if let Some(k) = cube_k {
            let r = cube_radicand(spec.n - k, &spec.b);
            f.cube = Some((r, Elem::generator(&t, steps.len() - 1)));
        }
        f.tower = t;
        Ok(f)
    }

    /// The new-tail center of the level-`k` quotient `Y/Q_k`.
    pub fn center(&self, spec: &CoverSpec, k: u32) -> Result<Elem, CoverError> {
        let t = &self.tower;
        let ab = &spec.a + &spec.b;
        let base = Elem::from_q(t, Q::new(spec.a.clone(), ab.clone()));
        let missing = |what: &str| CoverError::UnsupportedCase(format!("center field lacks {what}"));
        match self.p {
            2 => {
                let two = self.two.as_ref().ok_or_else(|| missing("2-adic data"))?;
                let i = self.i.as_ref().ok_or_else(|| missing("i"))?;
                let e = 2 * spec.n - spec.s - k;
                let unit = if e % 2 == 1 {
                    // √(±2i) = 1 ± i.
                    &Elem::one(t) + &i.scale(&qi(two.sigma))
                } else {
                    // √i = ζ_8 and √(-i) = ζ_8^{-1} = -ζ_8^3.
                    let z = self.zeta.as_ref().ok_or_else(|| missing("ζ_8"))?;
                    if two.sigma == 1 {
                        z.clone()
                    } else {
                        -&z.pow(3)
                    }
                };
                let mut root = unit.scale(&qb(&(rat::ppow(2, e / 2) * &two.u)));
                if two.t == 1 {
                    root = &root * self.sqrt5.as_ref().ok_or_else(|| missing("√5"))?;
                }
                Ok(&base + &root.scale(&Q::new(BigInt::one(), &ab * &ab)))
            }
            3 if needs_cube(spec, k) => {
                let (r, g) = self.cube.as_ref().ok_or_else(|| missing("the cube root"))?;
                debug_assert_eq!(*r, cube_radicand(spec.n - k, &spec.b));
                Ok(&base + &g.scale(&Q::new(BigInt::one(), ab)))
            }
            _ => Ok(base),
        }
    }

    /// An element of valuation `½(2n - s + 1/(p-1))`.
    pub fn scale(&self, spec: &CoverSpec) -> Result<Elem, CoverError> {
        let t = &self.tower;
        let (n, s, p) = (spec.n as i64, spec.s as i64, spec.p as i64);
        if p == 2 {
            let i = self.i.as_ref().expect("p = 2 field has i");
            return Ok((&Elem::one(t) + i).pow(2 * n - s + 1));
        }
        let pi = self
            .uniformizer
            .as_ref()
            .ok_or_else(|| CoverError::UnsupportedCase("center field is not scaled".into()))?;
        Ok(pi.pow((2 * n - s) * (p - 1) + 1))
    }
}

/// `½(2n - s + 1/(p-1))`, the radius valuation of the new tail.
pub fn new_tail_radius(p: u64, n: u32, s: u32) -> Q {
    (qi(2 * n as i64 - s as i64) + q(1, p as i64 - 1)) / qi(2)
}

/// Human-readable formula for the level-`k` quotient's center.
pub fn center_label(spec: &CoverSpec, k: u32) -> String {
    let ab = &spec.a + &spec.b;
    let base = fmt_q(&Q::new(spec.a.clone(), ab.clone()));
    match spec.p {
        2 => format!("{base} + sqrt(2^{} * {} * i)/({ab})^2", spec.n - k, spec.b),
        3 if needs_cube(spec, k) => format!("{base} + cbrt({})/({ab})", fmt_q(&cube_radicand(spec.n - k, &spec.b))),
        _ => base,
    }
}

/// Center and radius of the unique new étale tail.
#[derive(Debug, Clone)]
pub struct NewTailLocus {
    pub center: Elem,
    pub scale: Elem,
    pub radius: Q,
    pub label: String,
}

/// Serializable form of a disk with an exact center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusDesc {
    pub center: String,
    pub center_tower: TowerDesc,
    #[serde(with = "rat::qvec")]
    pub center_coords: Vec<Q>,
    pub radius_valuation: RatVal,
}

impl NewTailLocus {
    pub fn describe(&self) -> LocusDesc {
        LocusDesc {
            center: self.label.clone(),
            center_tower: self.center.tower.describe(),
            center_coords: self.center.c.clone(),
            radius_valuation: RatVal(self.radius.clone()),
        }
    }
}

pub fn new_tail_locus(spec: &CoverSpec) -> Result<NewTailLocus, CoverError> {
    let f = CenterField::new(spec, &[0], true)?;
    let center = f.center(spec, 0)?;
    let scale = f.scale(spec)?;
    Ok(NewTailLocus { center, scale, radius: new_tail_radius(spec.p, spec.n, spec.s), label: center_label(spec, 0) })
}

/// Expands on the disk and classifies, doubling the truncation while the
/// tail of the series cannot be bounded.
pub fn classify_on_disk(
    p: u64,
    n: u32,
    a: &BigInt,
    b: &BigInt,
    center: &Elem,
    scale: &Elem,
    cfg: &RunConfig,
) -> Result<ReductionVerdict, CoverError> {
    let mut l = cfg.truncation_for(p);
    loop {
        let exp = expand_disk_raw(p, n, a, b, center, scale, l)?;
        match classify_torsor_reduction(&exp) {
            Err(SeriesError::PrecisionExhausted(_)) if l < MAX_TRUNCATION => l = (2 * l).min(MAX_TRUNCATION),
            r => return Ok(r?),
        }
    }
}

/// The reduction of `y^{p^n} = c x^a (x-1)^b` on the new-tail disk.
pub fn certify_tail(spec: &CoverSpec, cfg: &RunConfig) -> Result<ReductionVerdict, CoverError> {
    let locus = new_tail_locus(spec)?;
    classify_on_disk(spec.p, spec.n, &spec.a, &spec.b, &locus.center, &locus.scale, cfg)
}

/// The reduction of the two-point quotient `y^{p^{n-s}} = x^a` on the disk
/// `D(1, n - s + 1/(p-1))` that carries the branch point 1.
pub fn certify_one_disk(spec: &CoverSpec, cfg: &RunConfig) -> Result<ReductionVerdict, CoverError> {
    let p = spec.p;
    let m = spec.n - spec.s;
    if m == 0 {
        return Err(CoverError::UnsupportedCase("x = 1 is totally ramified".into()));
    }
    let (t, e) = if p == 2 {
        let t = Tower::base(2)?;
        let e = Elem::from_q(&t, qb(&rat::ppow(2, m + 1)));
        (t, e)
    } else {
        let t = make_tower(p, &[(p as usize - 1, qi(p as i64))])?;
        let e = Elem::generator(&t, 0).pow(m as i64 * (p as i64 - 1) + 1);
        (t, e)
    };
    let one = Elem::one(&t);
    classify_on_disk(p, m, &spec.a, &BigInt::zero(), &one, &e, cfg)
}
