//! Higher ramification filtrations, Herbrand conversion and conductors.
//!
//! All extensions are of `K_0`, the completion of the maximal unramified
//! extension of `Q_p`, so every extension is totally ramified and `G = G_0`.
//! Conductors are upper-numbering jumps in units where `v(p) = 1` on `K_0`.
//!
//! Radical towers are handled by [`kummer_chain`]: each degree-`p` Kummer
//! step gets its break from the unit-filtration position of the radicand,
//! and the break is transported to the upper numbering over `K_0` through
//! the Herbrand function of the Galois closure built so far.

use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::rat::{self, fmt_q, q, qb, qi, Q};
use crate::tower::{self, Elem, Tower, TowerDesc, TowerError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RamificationError {
    #[error("malformed filtration: {0}")]
    MalformedFiltration(String),
    #[error("Artin-Schreier conductor {0} is divisible by p")]
    ConductorDivisibleByP(u64),
    #[error("Artin-Schreier conductor must be at least 1")]
    ConductorBelowOne,
    #[error("term of degree {0} is divisible by p")]
    TermDegreeDivisibleByP(u64),
    #[error("empty list of conductors")]
    EmptyList,
    #[error("negative conductor {0}")]
    NegativeConductor(String),
    #[error("radicand is zero")]
    RadicandZero,
    #[error("malformed field tower: {0}")]
    MalformedTower(String),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

type Result<T> = std::result::Result<T, RamificationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numbering {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jump {
    #[serde(with = "rat::qser")]
    pub at: Q,
    /// `|G^{at+ε}|` (or `|G_{at+ε}|`): the order just after the jump.
    pub order_after: u64,
}

/// The filtration of `G = Gal(L/K_0)`, recorded by its jumps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filtration {
    pub degree: u64,
    pub numbering: Numbering,
    pub jumps: Vec<Jump>,
}

impl Filtration {
    pub fn new(degree: u64, numbering: Numbering, jumps: Vec<Jump>) -> Result<Self> {
        let f = Filtration { degree, numbering, jumps };
        f.validate()?;
        Ok(f)
    }

    pub fn trivial() -> Self {
        Filtration { degree: 1, numbering: Numbering::Upper, jumps: Vec::new() }
    }

    /// A tame extension of degree `m`: one jump at 0.
    pub fn tame(m: u64) -> Self {
        if m == 1 {
            return Self::trivial();
        }
        Filtration { degree: m, numbering: Numbering::Upper, jumps: vec![Jump { at: qi(0), order_after: 1 }] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(RamificationError::MalformedFiltration(s));
        if self.degree == 0 {
            return bad("degree 0".into());
        }
        if self.jumps.is_empty() {
            if self.degree != 1 {
                return bad("nontrivial group without jumps".into());
            }
            return Ok(());
        }
        let mut prev_at: Option<&Q> = None;
        let mut prev_order = self.degree;
        for j in &self.jumps {
            if j.at.is_negative() {
                return bad(format!("negative jump {}", fmt_q(&j.at)));
            }
            if let Some(pa) = prev_at {
                if j.at <= *pa {
                    return bad("jumps are not strictly increasing".into());
                }
            }
            if j.order_after == 0 || j.order_after >= prev_order || !prev_order.is_multiple_of(j.order_after) {
                return bad(format!(
                    "order {} after jump {} does not properly divide {}",
                    j.order_after,
                    fmt_q(&j.at),
                    prev_order
                ));
            }
            prev_at = Some(&j.at);
            prev_order = j.order_after;
        }
        if prev_order != 1 {
            return bad("filtration does not end at the trivial group".into());
        }
        Ok(())
    }

    /// Exact piecewise-linear Herbrand transform to the requested numbering.
    pub fn herbrand_convert(&self, to: Numbering) -> Result<Filtration> {
        self.validate()?;
        if to == self.numbering {
            return Ok(self.clone());
        }
        let n = qi(self.degree as i64);
        let mut out = Vec::with_capacity(self.jumps.len());
        let mut prev_src = qi(0);
        let mut prev_dst = qi(0);
        let mut before = self.degree;
        for j in &self.jumps {
            let len = &j.at - &prev_src;
            // Lower to upper: slope |G_u| / |G|. Upper to lower: the reciprocal.
            let ratio = qi(before as i64) / &n;
            let dst = match to {
                Numbering::Upper => &prev_dst + len * ratio,
                Numbering::Lower => &prev_dst + len / ratio,
            };
            out.push(Jump { at: dst.clone(), order_after: j.order_after });
            prev_src = j.at.clone();
            prev_dst = dst;
            before = j.order_after;
        }
        Ok(Filtration { degree: self.degree, numbering: to, jumps: out })
    }

    pub fn upper(&self) -> Filtration {
        self.herbrand_convert(Numbering::Upper).expect("valid filtration")
    }

    pub fn lower(&self) -> Filtration {
        self.herbrand_convert(Numbering::Lower).expect("valid filtration")
    }

    pub fn jump_set(&self) -> Vec<Q> {
        self.jumps.iter().map(|j| j.at.clone()).collect()
    }

    /// The greatest upper jump; `None` for the trivial extension.
    pub fn conductor(&self) -> Option<Q> {
        self.upper().jumps.last().map(|j| j.at.clone())
    }

    /// Whether `G^x` is trivial.
    pub fn vanishes_at(&self, x: &Q) -> bool {
        self.conductor().is_none_or(|c| c < *x)
    }

    /// `|G^x|` or `|G_x|` in this filtration's numbering, for `x ≥ 0`.
    pub fn order_at(&self, x: &Q) -> u64 {
        let mut ord = self.degree;
        for j in &self.jumps {
            if j.at < *x {
                ord = j.order_after;
            }
        }
        ord
    }

    /// Quotient by the last nontrivial group `G^{c}` (`c` the conductor).
    /// Upper numbering passes to quotients unchanged.
    pub fn quotient_by_last(&self) -> Filtration {
        let up = self.upper();
        let Some(last) = up.jumps.last() else {
            return up;
        };
        let k = if up.jumps.len() >= 2 { up.jumps[up.jumps.len() - 2].order_after } else { up.degree };
        let _ = last;
        let jumps: Vec<Jump> = up.jumps[..up.jumps.len() - 1]
            .iter()
            .map(|j| Jump { at: j.at.clone(), order_after: j.order_after / k })
            .collect();
        Filtration { degree: up.degree / k, numbering: Numbering::Upper, jumps }
    }
}

/// `Gal(K_0(ζ_{p^n}) / K_0) ≅ (Z/p^n)^×` in upper numbering.
///
/// Lower jumps are `0` (odd `p` only) and `p^k - 1` for `1 ≤ k < n`.
pub fn cyclotomic_filtration(p: u64, n: u32) -> Filtration {
    assert!(n >= 1, "cyclotomic level must be at least 1");
    let degree = (p - 1) * p.pow(n - 1);
    let mut jumps = Vec::new();
    if p > 2 {
        jumps.push(Jump { at: qi(0), order_after: p.pow(n - 1) });
    }
    for k in 1..n {
        jumps.push(Jump { at: qi(p.pow(k) as i64 - 1), order_after: p.pow(n - 1 - k) });
    }
    Filtration { degree, numbering: Numbering::Lower, jumps }.upper()
}

/// Genus `(h-1)(p-1)/2` of the Artin-Schreier cover with conductor `h`.
pub fn artin_schreier_genus(h: u64, p: u64) -> Result<u64> {
    if h < 1 {
        return Err(RamificationError::ConductorBelowOne);
    }
    if h.is_multiple_of(p) {
        return Err(RamificationError::ConductorDivisibleByP(h));
    }
    Ok((h - 1) * (p - 1) / 2)
}

/// Conductor of `y^p - y = g(x)` from the degrees of the monomials of `g`.
pub fn artin_schreier_conductor(degrees: &[u64], p: u64) -> Result<u64> {
    if let Some(&d) = degrees.iter().find(|&&d| d % p == 0) {
        return Err(RamificationError::TermDegreeDivisibleByP(d));
    }
    degrees.iter().copied().max().ok_or(RamificationError::EmptyList)
}

/// The conductor of a compositum of Galois extensions is the largest one.
pub fn compositum_conductor(hs: &[Q]) -> Result<Q> {
    if let Some(h) = hs.iter().find(|h| h.is_negative()) {
        return Err(RamificationError::NegativeConductor(fmt_q(h)));
    }
    hs.iter().max().cloned().ok_or(RamificationError::EmptyList)
}

/// A tame extension on top of `L/K` leaves the conductor unchanged.
pub fn tame_top_conductor(h: &Q) -> Q {
    h.clone()
}

/// Upper-numbering profile of a Galois extension `F/K_0`: the tame degree
/// and the wild jumps `(h, g)` where `|G^w| = Π_{h ≥ w} p^g` for `w > 0`.
/// `g = None` stands for an unbounded factor, used to dominate unknown
/// Galois closures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub p: u64,
    pub tame: u64,
    pub wild: Vec<(Q, Option<u32>)>,
}

impl Profile {
    pub fn base(p: u64) -> Self {
        Profile { p, tame: 1, wild: Vec::new() }
    }

    /// `K_c = K_0(ζ_{p^c})`.
    pub fn cyclotomic(p: u64, c: u32) -> Self {
        let tame = if c >= 1 && p > 2 { p - 1 } else { 1 };
        Profile { p, tame, wild: (1..c.max(1)).map(|j| (qi(j as i64), Some(1))).collect() }
    }

    /// Ramification index over `K_0`; `None` when a factor is unbounded.
    pub fn e(&self) -> Option<BigInt> {
        let mut g = 0u32;
        for (_, f) in &self.wild {
            g += (*f)?;
        }
        Some(BigInt::from(self.tame) * rat::ppow(self.p, g))
    }

    pub fn top(&self) -> Option<Q> {
        self.wild.last().map(|(h, _)| h.clone())
    }

    pub fn push(&mut self, h: Q, g: Option<u32>) {
        match self.wild.iter_mut().find(|(x, _)| *x == h) {
            Some(slot) => {
                slot.1 = match (slot.1, g) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                }
            }
            None => {
                self.wild.push((h, g));
                self.wild.sort_by(|a, b| a.0.cmp(&b.0));
            }
        }
    }

    /// Segments `(start, end, |G^w|)` of the step function `w ↦ |G^w|` on `(0, top]`.
    fn segments(&self) -> Vec<(Q, Q, Option<BigInt>)> {
        let mut out = Vec::new();
        let mut start = qi(0);
        for (k, (h, _)) in self.wild.iter().enumerate() {
            let mut ord = Some(BigInt::one());
            for (_, g) in &self.wild[k..] {
                ord = match (ord, g) {
                    (Some(o), Some(g)) => Some(o * rat::ppow(self.p, *g)),
                    _ => None,
                };
            }
            if *h > start {
                out.push((start.clone(), h.clone(), ord));
            }
            start = h.clone();
        }
        out
    }

    /// `ψ̃(v) = ∫_0^v dw / |G^w|`: maps an upper jump over `K_0` to the
    /// matching break in `F` measured with `v(p) = 1`.
    pub fn psi(&self, v: &Q) -> Q {
        let mut acc = qi(0);
        let mut end = qi(0);
        for (a, b, ord) in self.segments() {
            if *v <= a {
                return acc;
            }
            let hi = if *v < b { v.clone() } else { b.clone() };
            if let Some(o) = ord {
                acc += (&hi - &a) / qb(&o);
            }
            end = b;
        }
        if *v > end {
            acc += v - &end;
        }
        acc
    }

    /// `φ̃(y) = sup { w : ψ̃(w) ≤ y }`.
    pub fn phi(&self, y: &Q) -> Q {
        let mut acc = qi(0);
        let mut end = qi(0);
        for (a, b, ord) in self.segments() {
            match ord {
                None => {}
                Some(o) => {
                    let len = (&b - &a) / qb(&o);
                    if &acc + &len > *y {
                        return &a + (y - &acc) * qb(&o);
                    }
                    acc += len;
                }
            }
            end = b;
        }
        &end + (y - &acc)
    }
}

/// What is known about a Kummer radicand.
#[derive(Debug, Clone)]
pub enum Radicand {
    Rational(Q),
    /// An element of a certified tower whose completion lies in `K_level`.
    Element {
        elem: Elem,
        field_level: u32,
    },
    Opaque,
}

/// A subfield of the base used to improve radicands by `p`-th powers.
#[derive(Debug, Clone)]
pub struct Model {
    pub tower: Arc<Tower>,
    pub uniformizer: Elem,
    pub e: u64,
    pub residue_size: u64,
    pub reps: Vec<Elem>,
}

impl Model {
    pub fn from_tower(t: &Arc<Tower>) -> Option<Model> {
        let e = t.ramification_index()?;
        let uniformizer = t.uniformizer()?;
        Some(Model {
            tower: t.clone(),
            uniformizer,
            e,
            residue_size: t.prime().pow(t.residue_degree() as u32),
            reps: t.residue_reps(),
        })
    }
}

/// Minimal polynomial (low-to-high, monic term omitted) of the Gauss period
/// `η = Σ_{x^{p-1} ≡ 1 mod p^2} ζ_{p^2}^x`, a generator of the degree-`p`
/// subfield of `Q(ζ_{p^2})`.
pub fn gauss_period_polynomial(p: u64) -> Vec<Q> {
    assert!(p > 2, "the wild subfield needs odd p");
    let n = (p * p) as usize;
    let teich: Vec<usize> =
        (1..n).filter(|&x| BigInt::from(x).modpow(&BigInt::from(p - 1), &BigInt::from(n)).is_one()).collect();
    // Conjugates η_k = Σ ζ^{x (1+p)^k}, as vectors in Z[x]/(x^{p^2} - 1).
    let mut conj = Vec::new();
    let mut mult = 1usize;
    for _ in 0..p {
        let mut v = vec![BigInt::zero(); n];
        for &x in &teich {
            v[x * mult % n] += 1;
        }
        conj.push(v);
        mult = mult * (1 + p as usize) % n;
    }
    // Π_k (X - η_k), coefficients in Z[C_{p^2}], lowest degree first.
    let mut poly: Vec<Vec<BigInt>> = vec![{
        let mut one = vec![BigInt::zero(); n];
        one[0] = BigInt::one();
        one
    }];
    for eta in &conj {
        let mut next = vec![vec![BigInt::zero(); n]; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            for (j, x) in c.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                next[i + 1][j] += x;
                for (k, y) in eta.iter().enumerate() {
                    if !y.is_zero() {
                        next[i][(j + k) % n] -= x * y;
                    }
                }
            }
        }
        poly = next;
    }
    // Each coefficient is rational; c(ζ) = r iff c - r·[0] is constant on
    // every residue class mod p (the kernel of x ↦ ζ is spanned by the class sums).
    let pu = p as usize;
    let deg = (pu - 1) * pu;
    poly.iter()
        .take(pu)
        .map(|c| {
            let tr: BigInt = c
                .iter()
                .enumerate()
                .map(|(m, a)| {
                    let t: i64 = if m == 0 {
                        deg as i64
                    } else if m % pu == 0 {
                        -(p as i64)
                    } else {
                        0
                    };
                    a * t
                })
                .sum();
            let r = Q::new(tr, BigInt::from(deg));
            for cls in 0..pu {
                let vals: Vec<Q> = (0..pu)
                    .map(|k| {
                        let idx = cls + k * pu;
                        let x = qb(&c[idx]);
                        if idx == 0 {
                            x - &r
                        } else {
                            x
                        }
                    })
                    .collect();
                assert!(vals.iter().all(|v| *v == vals[0]), "Gauss period coefficient is not rational");
            }
            r
        })
        .collect()
}

/// A model subfield of `K_c` with the same wild ramification, when one is
/// implemented: `Q` for `c ≤ 1`, the Gauss-period field for odd `p` and
/// `c = 2`, `Q(i)` and `Q(ζ_8)` for `p = 2`.
pub fn cyclotomic_model(p: u64, c: u32) -> Result<Option<Model>> {
    let t = match (p, c) {
        (_, 0 | 1) => return Ok(None),
        (2, 2) => tower::make_tower(2, &[(2, qi(-1))])?,
        (2, 3) => tower::cyclotomic_tower(2, 3)?,
        (_, 2) if p > 2 => {
            let base = Tower::base(p)?;
            let coeffs: Vec<Elem> = gauss_period_polynomial(p).into_iter().map(|x| Elem::from_q(&base, x)).collect();
            base.adjoin_poly("eta", &coeffs)?
        }
        _ => return Ok(None),
    };
    Ok(Model::from_tower(&t))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStep {
    /// Break in units `v(p) = 1` of the field below; `None` for a trivial step.
    #[serde(with = "rat::qopt")]
    pub y: Option<Q>,
    /// Break in uniformizer units of the field below, when its ramification index is known.
    #[serde(with = "rat::qopt")]
    pub break_lower: Option<Q>,
    /// Upper jump over `K_0` of the Galois closure.
    #[serde(with = "rat::qopt")]
    pub h: Option<Q>,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub steps: Vec<ChainStep>,
    pub profile: Profile,
    pub profile_exact: bool,
}

impl ChainResult {
    pub fn conductor(&self) -> Option<Q> {
        self.steps.iter().filter_map(|s| s.h.clone()).max()
    }

    pub fn exact(&self) -> bool {
        self.steps.iter().all(|s| s.exact)
    }
}

struct ChainState {
    p: u64,
    cur: Profile,
    cur_exact: bool,
    steps: Vec<ChainStep>,
    factor: Option<u32>,
}

impl ChainState {
    fn ramified(&mut self, y: Q, exact: bool) {
        let h = self.cur.phi(&y);
        let break_lower = self.cur.e().map(|e| &y * qb(&e));
        self.steps.push(ChainStep { y: Some(y), break_lower, h: Some(h.clone()), exact: exact && self.cur_exact });
        self.cur.push(h, self.factor);
        if self.factor != Some(1) {
            self.cur_exact = false;
        }
    }

    fn trivial(&mut self, exact: bool) {
        self.steps.push(ChainStep { y: None, break_lower: None, h: None, exact });
    }

    fn tau_exact(&self, tau: &Q) -> bool {
        let pq = q(self.p as i64, self.p as i64 - 1);
        if *tau >= pq {
            return true;
        }
        match self.cur.e() {
            None => false,
            Some(e) => {
                let t = tau * qb(&e);
                t.is_integer() && !t.to_integer().is_multiple_of(&BigInt::from(self.p))
            }
        }
    }
}

/// Breaks and upper jumps of the Galois closure of `F(u^{1/p^k})` over `K_0`,
/// for `F/K_0` Galois with the given profile and containing `ζ_{p^k}`.
///
/// Each degree-`p` step uses the classical break `p e/(p-1) - t`, where
/// `t = max v(u w^p - 1)`; `t` is improved greedily inside `model` and is
/// certified maximal once it is prime to `p`. Otherwise the returned values
/// are upper bounds.
pub fn kummer_chain(
    p: u64,
    k: u32,
    base: &Profile,
    base_exact: bool,
    radicand: &Radicand,
    model: Option<&Model>,
) -> Result<ChainResult> {
    let pq = q(p as i64, p as i64 - 1);
    let factor = match radicand {
        Radicand::Rational(_) => Some(1),
        // Conjugates over K_0 number at most the ramification index of the model.
        Radicand::Element { elem, .. } => elem.tower.ramification_index().map(|e| e as u32),
        Radicand::Opaque => None,
    };
    let mut st = ChainState { p, cur: base.clone(), cur_exact: base_exact, steps: Vec::new(), factor };
    let finish = |st: ChainState| ChainResult { steps: st.steps, profile: st.cur, profile_exact: st.cur_exact };

    let (u, v): (Elem, Q) = match radicand {
        Radicand::Opaque => {
            for _ in 0..k {
                st.ramified(pq.clone(), false);
            }
            return Ok(finish(st));
        }
        Radicand::Rational(x) => {
            let t = match model {
                Some(m) => m.tower.clone(),
                None => Tower::base(p)?,
            };
            let v = rat::vp(x, p).ok_or(RamificationError::RadicandZero)?;
            (Elem::from_q(&t, x.clone()), qi(v))
        }
        Radicand::Element { elem, .. } => {
            let v = elem.val().ok_or(RamificationError::RadicandZero)?;
            (elem.clone(), v)
        }
    };
    let model = match radicand {
        Radicand::Element { elem, .. } => Model::from_tower(&elem.tower),
        _ => model.cloned(),
    };

    let mut u = u;
    if !v.is_zero() {
        let e_f = base.e().expect("base fields have finite ramification");
        let r = &v * qb(&e_f);
        let prime_to_p = r.is_integer() && !r.to_integer().is_multiple_of(&BigInt::from(p));
        if prime_to_p {
            for _ in 0..k {
                st.ramified(pq.clone(), true);
            }
            return Ok(finish(st));
        }
        let pk = rat::ppow(p, k);
        let shift = model.as_ref().and_then(|m| {
            let s = &v * qi(m.e as i64);
            (s.is_integer() && s.to_integer().is_multiple_of(&pk)).then(|| (m, s.to_integer()))
        });
        match shift {
            Some((m, s)) => {
                let s = s.to_i64().expect("small valuation");
                u = &u * &m.uniformizer.pow(-s);
            }
            None => {
                for _ in 0..k {
                    st.ramified(pq.clone(), false);
                }
                return Ok(finish(st));
            }
        }
    }

    // Unit radicand: replace u by β = u^{1-q}, which generates the same
    // p-power Kummer extensions and is a principal unit.
    let q_res = model.as_ref().map_or(p, |m| m.residue_size);
    let beta = u.pow(1 - q_res as i64);
    let one = Elem::one(&beta.tower);
    let (mut beta, mut tau) = match (&beta - &one).val() {
        None => {
            for _ in 0..k {
                st.trivial(true);
            }
            return Ok(finish(st));
        }
        Some(t) => (beta, t),
    };
    if let Some(m) = &model {
        (beta, tau) = greedy_improve(p, m, beta, tau);
    }
    let _ = &beta;

    let mut tau_opt = Some(tau);
    for _ in 0..k {
        let Some(tau) = tau_opt.clone() else {
            st.trivial(true);
            continue;
        };
        let exact = st.tau_exact(&tau);
        if tau > pq {
            // β is a p-th power in F; its root γ has v(γ - 1) = τ - 1.
            st.trivial(true);
            tau_opt = Some(tau - qi(1));
        } else if tau == pq {
            // Unramified over F, hence trivial over K_0.
            st.trivial(true);
            tau_opt = Some(q(1, p as i64 - 1));
        } else {
            st.ramified(&pq - &tau, exact);
            tau_opt = Some(tau / qi(p as i64));
        }
    }
    Ok(finish(st))
}

/// Raises `τ = v(β - 1)` by multiplying `β` with `p`-th powers `(1 + λ ϖ^j)^p`
/// while `e τ` is divisible by `p` and below `p e/(p-1)`.
fn greedy_improve(p: u64, m: &Model, beta: Elem, tau: Q) -> (Elem, Q) {
    let pq = q(p as i64, p as i64 - 1);
    let mut beta = beta;
    let mut tau = tau;
    let one = Elem::one(&m.tower);
    let beta_m = m.tower.embed(&beta);
    beta = beta_m;
    loop {
        if tau >= pq {
            break;
        }
        let t = &tau * qi(m.e as i64);
        if !t.is_integer() {
            break;
        }
        let t = t.to_integer();
        if !t.is_multiple_of(&BigInt::from(p)) {
            break;
        }
        let j = (t / BigInt::from(p)).to_i64().expect("small exponent");
        let pij = m.uniformizer.pow(j);
        let mut improved = None;
        for lam in m.reps.iter().filter(|x| !x.is_zero()) {
            let w = &one + &(lam * &pij);
            let cand = &beta * &w.pow(p as i64);
            match (&cand - &one).val() {
                None => {
                    improved = Some((cand, None));
                    break;
                }
                Some(v) if v > tau => {
                    improved = Some((cand, Some(v)));
                    break;
                }
                _ => {}
            }
        }
        match improved {
            None => break,
            Some((b, None)) => {
                // β became 1: every step is trivial.
                return (b, qi(1_000_000));
            }
            Some((b, Some(v))) => {
                beta = b;
                tau = v;
            }
        }
    }
    (beta, tau)
}

/// How a conductor value is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConductorKind {
    Exact,
    Bound,
}

/// A conductor contribution; `value = None` means the step adds no jump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: ConductorKind,
    #[serde(with = "rat::qopt")]
    pub value: Option<Q>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadicandDesc {
    Rational {
        #[serde(with = "rat::qser")]
        value: Q,
        #[serde(default)]
        label: String,
    },
    Element {
        tower: TowerDesc,
        #[serde(with = "rat::qvec")]
        coords: Vec<Q>,
        /// Smallest `c` with the radicand's field inside `K_c`.
        field_level: u32,
        #[serde(default)]
        label: String,
    },
    Opaque {
        #[serde(default)]
        label: String,
    },
}

impl RadicandDesc {
    pub fn label(&self) -> &str {
        match self {
            RadicandDesc::Rational { label, .. }
            | RadicandDesc::Element { label, .. }
            | RadicandDesc::Opaque { label } => label,
        }
    }

    pub fn from_elem(x: &Elem, field_level: u32, label: &str) -> Self {
        RadicandDesc::Element { tower: x.tower.describe(), coords: x.c.clone(), field_level, label: label.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TowerStep {
    Cyclotomic {
        level: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductor: Option<Annotation>,
    },
    /// `K(u^{1/degree})` where `K = K_level` (or the field of step `over`).
    Kummer {
        degree: u64,
        level: u32,
        #[serde(default)]
        over: Option<usize>,
        radicand: RadicandDesc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductor: Option<Annotation>,
    },
    Tame {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductor: Option<Annotation>,
    },
}

/// A field of the form `K_n(radicals)` up to a tame extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTower {
    pub prime: u64,
    pub n: u32,
    pub steps: Vec<TowerStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub annotation: Annotation,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chain: Vec<ChainStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConductorReport {
    pub conductor: Annotation,
    pub n: u32,
    /// Whether the `n`-th upper ramification group of the Galois closure over `K_0` vanishes.
    pub vanishes_at_n: bool,
    pub steps: Vec<StepReport>,
}

/// Conductor of the Galois closure over `K_0` of a field tower, as the
/// maximum over its steps.
pub fn evaluate_tower(ft: &FieldTower) -> Result<ConductorReport> {
    let p = ft.prime;
    if !rat::is_prime(p) {
        return Err(TowerError::NotPrime(p).into());
    }
    let mut reports: Vec<StepReport> = Vec::new();
    let mut profiles: Vec<Option<(Profile, bool)>> = Vec::new();
    for (i, step) in ft.steps.iter().enumerate() {
        let (ann, chain, prof) = match step {
            TowerStep::Cyclotomic { level, .. } => {
                if *level == 0 {
                    return Err(RamificationError::MalformedTower("cyclotomic level 0".into()));
                }
                let f = cyclotomic_filtration(p, *level);
                (
                    Annotation { kind: ConductorKind::Exact, value: f.conductor() },
                    Vec::new(),
                    Some((Profile::cyclotomic(p, *level), true)),
                )
            }
            TowerStep::Tame { .. } => (Annotation { kind: ConductorKind::Exact, value: None }, Vec::new(), None),
            TowerStep::Kummer { degree, level, over, radicand, .. } => {
                let k = match rat::vp_int(&BigInt::from(*degree), p) {
                    Some(k) if p.checked_pow(k as u32) == Some(*degree) => k as u32,
                    _ => {
                        return Err(RamificationError::MalformedTower(format!(
                            "Kummer degree {degree} is not a power of {p}"
                        )))
                    }
                };
                if k == 0 {
                    (Annotation { kind: ConductorKind::Exact, value: None }, Vec::new(), None)
                } else {
                    if *level < k {
                        return Err(RamificationError::MalformedTower(format!(
                            "step {i}: K_{level} does not contain the {degree}-th roots of unity"
                        )));
                    }
                    let (rad, field_level) = match radicand {
                        RadicandDesc::Rational { value, .. } => (Radicand::Rational(value.clone()), 0),
                        RadicandDesc::Element { tower: td, coords, field_level, .. } => {
                            let t = Tower::from_desc(td)?;
                            if t.prime() != p || coords.len() != t.degree() {
                                return Err(RamificationError::MalformedTower(format!(
                                    "step {i}: radicand does not match its tower"
                                )));
                            }
                            let elem = Elem { tower: t, c: coords.clone() };
                            (Radicand::Element { elem, field_level: *field_level }, *field_level)
                        }
                        RadicandDesc::Opaque { .. } => (Radicand::Opaque, 0),
                    };
                    let c = (*level).max(field_level);
                    let (base, base_exact) = match over {
                        Some(j) => match profiles.get(*j).cloned().flatten() {
                            Some(x) if *j < i => x,
                            _ => {
                                return Err(RamificationError::MalformedTower(format!(
                                    "step {i}: `over` must name an earlier cyclotomic or Kummer step"
                                )))
                            }
                        },
                        None => (Profile::cyclotomic(p, c), true),
                    };
                    let model = match &rad {
                        Radicand::Rational(_) if over.is_none() => cyclotomic_model(p, c)?,
                        _ => None,
                    };
                    let res = kummer_chain(p, k, &base, base_exact, &rad, model.as_ref())?;
                    let ann = Annotation {
                        kind: if res.exact() { ConductorKind::Exact } else { ConductorKind::Bound },
                        value: res.conductor(),
                    };
                    let prof = Some((res.profile.clone(), res.profile_exact));
                    (ann, res.steps, prof)
                }
            }
        };
        profiles.push(prof);
        reports.push(StepReport { index: i, annotation: ann, chain });
    }
    let values: Vec<Q> = reports.iter().filter_map(|r| r.annotation.value.clone()).collect();
    let value = if values.is_empty() { None } else { Some(compositum_conductor(&values)?) };
    let exact = reports.iter().all(|r| r.annotation.kind == ConductorKind::Exact);
    let vanishes = value.as_ref().is_none_or(|h| *h < qi(ft.n as i64));
    Ok(ConductorReport {
        conductor: Annotation { kind: if exact { ConductorKind::Exact } else { ConductorKind::Bound }, value },
        n: ft.n,
        vanishes_at_n: vanishes,
        steps: reports,
    })
}

/// Conductor of a single Kummer extension `K_level(u^{1/m})` over `K_0`.
pub fn kummer_step_conductor(p: u64, level: u32, u: &Radicand, m: u64) -> Result<(Annotation, Vec<ChainStep>)> {
    let radicand = match u {
        Radicand::Rational(x) => RadicandDesc::Rational { value: x.clone(), label: String::new() },
        Radicand::Element { elem, field_level } => RadicandDesc::from_elem(elem, *field_level, ""),
        Radicand::Opaque => RadicandDesc::Opaque { label: String::new() },
    };
    let ft = FieldTower {
        prime: p,
        n: level.max(1),
        steps: vec![TowerStep::Kummer { degree: m, level, over: None, radicand, conductor: None }],
    };
    let mut r = evaluate_tower(&ft)?;
    let s = r.steps.remove(0);
    Ok((s.annotation, s.chain))
}

impl FieldTower {
    /// Copy with each step's conductor annotation filled in.
    pub fn annotated(&self) -> Result<(FieldTower, ConductorReport)> {
        let rep = evaluate_tower(self)?;
        let mut out = self.clone();
        for (s, r) in out.steps.iter_mut().zip(&rep.steps) {
            let a = Some(r.annotation.clone());
            match s {
                TowerStep::Cyclotomic { conductor, .. }
                | TowerStep::Kummer { conductor, .. }
                | TowerStep::Tame { conductor } => *conductor = a,
            }
        }
        Ok((out, rep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclotomic_conductors() {
        for p in [2u64, 3, 5, 7] {
            for n in 1..=4u32 {
                let f = cyclotomic_filtration(p, n);
                let expect: Vec<Q> = if p == 2 {
                    (1..n).map(|j| qi(j as i64)).collect()
                } else {
                    (0..n).map(|j| qi(j as i64)).collect()
                };
                assert_eq!(f.jump_set(), expect, "p={p} n={n}");
            }
        }
        assert_eq!(cyclotomic_filtration(5, 2).lower().jump_set(), vec![qi(0), qi(4)]);
    }

    #[test]
    fn tame_filtration_is_fixed() {
        let t = Filtration::tame(4);
        assert_eq!(t.lower(), Filtration { numbering: Numbering::Lower, ..t.clone() });
        assert_eq!(t.conductor(), Some(qi(0)));
    }

    #[test]
    fn artin_schreier_rules() {
        assert_eq!(artin_schreier_genus(2, 5), Ok(2));
        assert_eq!(artin_schreier_genus(1, 5), Ok(0));
        assert_eq!(artin_schreier_genus(3, 3), Err(RamificationError::ConductorDivisibleByP(3)));
        assert_eq!(artin_schreier_conductor(&[1, 2], 5), Ok(2));
        assert_eq!(artin_schreier_conductor(&[7], 3), Ok(7));
        assert_eq!(artin_schreier_conductor(&[3], 3), Err(RamificationError::TermDegreeDivisibleByP(3)));
    }

    #[test]
    fn profile_phi_psi() {
        let mut l = Profile::cyclotomic(3, 1);
        l.push(q(3, 2), Some(1));
        assert_eq!(l.phi(&q(3, 2)), q(5, 2));
        assert_eq!(l.psi(&q(5, 2)), q(3, 2));
        let k3 = Profile::cyclotomic(5, 3);
        for y in [q(1, 100), q(1, 4), qi(1), q(7, 3)] {
            assert_eq!(k3.psi(&k3.phi(&y)), y);
        }
    }

    #[test]
    fn gauss_period_polynomials() {
        let p3: Vec<Q> = gauss_period_polynomial(3);
        assert_eq!(p3, vec![qi(1), qi(-3), qi(0)]);
        let p5 = gauss_period_polynomial(5);
        assert_eq!(p5, vec![qi(1), qi(10), qi(5), qi(-10), qi(0)]);
    }

    #[test]
    fn models_have_the_wild_ramification() {
        for p in [3u64, 5, 7] {
            let m = cyclotomic_model(p, 2).unwrap().unwrap();
            assert_eq!(m.e, p);
            assert_eq!(m.uniformizer.valuation().unwrap(), q(1, p as i64));
        }
        assert_eq!(cyclotomic_model(2, 3).unwrap().unwrap().e, 4);
    }

    #[test]
    fn cube_root_radicand_over_k1() {
        // v(R) = 5 for n = 2: break 3 over K_1 and upper jump 3/2.
        let (ann, chain) = kummer_step_conductor(3, 1, &Radicand::Rational(qi(243 * 7)), 3).unwrap();
        assert_eq!(ann, Annotation { kind: ConductorKind::Exact, value: Some(q(3, 2)) });
        assert_eq!(chain[0].break_lower, Some(qi(3)));
    }

    #[test]
    fn pth_power_radicand_is_trivial() {
        let (ann, _) = kummer_step_conductor(5, 1, &Radicand::Rational(qi(32)), 5).unwrap();
        assert_eq!(ann.value, None);
        let (ann, _) = kummer_step_conductor(5, 1, &Radicand::Rational(qi(26)), 5).unwrap();
        assert_eq!(ann.value, None);
    }
}
