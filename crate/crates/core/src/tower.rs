//! Towers of simple extensions of the rationals with a distinguished prime `p`.
//!
//! Every step is certified irreducible over the `p`-adic completion of the
//! field below it, so the `p`-adic valuation extends uniquely and
//! `v(α) = v_p(N(α)) / D`. Elements are dense coordinate vectors over the
//! monomial basis; the top generator varies slowest.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::rat::{self, fmt_q, qi, vp, vp_int, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TowerError {
    #[error("step {0}: irreducibility over the completion could not be certified")]
    IrreducibilityUnverified(String),
    #[error("step {0}: radicand is zero")]
    ZeroRadicand(String),
    #[error("valuation of zero requested")]
    ZeroElement,
    #[error("element belongs to a different tower")]
    TowerMismatch,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("operation needs p = 2, tower has p = {0}")]
    WrongPrime(u64),
    #[error("malformed tower description: {0}")]
    Malformed(String),
}

/// Why a step is irreducible over the completion below it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `f(x + shift)` has a one-segment Newton polygon whose slope, in
    /// uniformizer units of the lower field, has numerator prime to the degree.
    Eisenstein {
        #[serde(with = "rat::qser")]
        shift: Q,
        #[serde(with = "rat::qser")]
        slope: Q,
    },
    /// Unit rational radicand that is not a q-th power for any prime q | m (Capelli).
    UnitHensel { ramification_exact: bool },
    /// Integral polynomial whose reduction mod p is irreducible over F_p.
    Unramified,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub name: String,
    pub degree: usize,
    /// `c_0 .. c_{m-1}` of the monic minimal polynomial `x^m + Σ c_i x^i`.
    pub poly: Vec<Vec<Q>>,
    pub radicand: Option<Vec<Q>>,
    pub certificate: Certificate,
    pub gen_val: Q,
}

#[derive(Debug)]
pub struct Tower {
    prime: u64,
    steps: Vec<Step>,
    dims: Vec<usize>,
    ram: Option<u64>,
    res_deg: u64,
}

impl PartialEq for Tower {
    fn eq(&self, other: &Self) -> bool {
        self.prime == other.prime
            && self.steps.len() == other.steps.len()
            && self.steps.iter().zip(&other.steps).all(|(a, b)| a.name == b.name && a.poly == b.poly)
    }
}

impl Tower {
    pub fn base(p: u64) -> Result<Arc<Tower>, TowerError> {
        if !rat::is_prime(p) {
            return Err(TowerError::NotPrime(p));
        }
        Ok(Arc::new(Tower { prime: p, steps: Vec::new(), dims: vec![1], ram: Some(1), res_deg: 1 }))
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn degree(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Ramification index of the completion over `Q_p`, when certified.
    pub fn ramification_index(&self) -> Option<u64> {
        self.ram
    }

    pub fn residue_degree(&self) -> u64 {
        self.res_deg
    }

    fn level(&self) -> usize {
        self.steps.len()
    }

    /// Adjoins a root of `x^m - r`.
    pub fn adjoin_radical(self: &Arc<Self>, name: &str, m: usize, r: &Elem) -> Result<Arc<Tower>, TowerError> {
        if !Arc::ptr_eq(&r.tower, self) && *r.tower != **self {
            return Err(TowerError::TowerMismatch);
        }
        if r.is_zero() {
            return Err(TowerError::ZeroRadicand(name.to_string()));
        }
        let d = self.degree();
        let mut poly = vec![vec![Q::zero(); d]; m];
        poly[0] = r.c.iter().map(|x| -x).collect();
        self.extend(name, m, poly, Some(r.c.clone()))
    }

    /// Adjoins a root of the monic polynomial `x^m + Σ c_i x^i` with coefficients in this tower.
    pub fn adjoin_poly(self: &Arc<Self>, name: &str, lower_coeffs: &[Elem]) -> Result<Arc<Tower>, TowerError> {
        let m = lower_coeffs.len();
        let poly: Vec<Vec<Q>> = lower_coeffs.iter().map(|e| self.embed(e).c).collect();
        self.extend(name, m, poly, None)
    }

    fn extend(
        self: &Arc<Self>,
        name: &str,
        m: usize,
        poly: Vec<Vec<Q>>,
        radicand: Option<Vec<Q>>,
    ) -> Result<Arc<Tower>, TowerError> {
        if m < 2 {
            return Err(TowerError::Malformed(format!("step {name} has degree {m}")));
        }
        let fail = || TowerError::IrreducibilityUnverified(name.to_string());
        let lvl = self.level();
        let c0_val = self.val_at(lvl, &poly[0]).ok_or_else(|| TowerError::ZeroRadicand(name.to_string()))?;
        let gen_val = c0_val / qi(m as i64);

        let (certificate, ram, res_deg) = if let Some(c) = self.unit_hensel(m, &poly, &radicand) {
            c
        } else if let Some(c) = self.eisenstein(m, &poly) {
            c
        } else if let Some(c) = self.unramified(m, &poly) {
            c
        } else {
            return Err(fail());
        };

        let mut steps = self.steps.clone();
        steps.push(Step { name: name.to_string(), degree: m, poly, radicand, certificate, gen_val });
        let mut dims = self.dims.clone();
        dims.push(self.degree() * m);
        let mut t = Tower { prime: self.prime, steps, dims, ram, res_deg };
        if let Certificate::UnitHensel { ramification_exact: false } = t.steps[lvl].certificate {
            t.probe_ramification();
        }
        Ok(Arc::new(t))
    }

    /// Capelli test for `x^m - r` with `r` a rational unit.
    fn unit_hensel(
        &self,
        m: usize,
        poly: &[Vec<Q>],
        radicand: &Option<Vec<Q>>,
    ) -> Option<(Certificate, Option<u64>, u64)> {
        if self.level() != 0 {
            return None;
        }
        let r = &radicand.as_ref()?[0];
        if vp(r, self.prime)? != 0 {
            return None;
        }
        let _ = poly;
        let p = self.prime;
        for q in rat::prime_factors(m as u64) {
            if is_mth_power(r, q, p, 0).ok()? {
                return None;
            }
        }
        if m.is_multiple_of(4) && is_mth_power(&(r / qi(-4)), 4, p, 0).ok()? {
            return None;
        }
        if !(m as u64).is_multiple_of(p) {
            // Tame unit radicand: x^m - r stays irreducible mod p only when
            // the residue extension has full degree; require that explicitly.
            let f = residue_order(r, p, m as u64)?;
            if f != m as u64 {
                return None;
            }
            return Some((Certificate::UnitHensel { ramification_exact: true }, Some(1), m as u64));
        }
        Some((Certificate::UnitHensel { ramification_exact: false }, None, 1))
    }

    /// Single-segment Newton polygon after a rational shift.
    fn eisenstein(&self, m: usize, poly: &[Vec<Q>]) -> Option<(Certificate, Option<u64>, u64)> {
        let e_low = self.ram?;
        let p = self.prime as i64;
        let lvl = self.level();
        let mut shifts = vec![qi(0)];
        for k in 1..=p {
            shifts.push(qi(k));
            shifts.push(qi(-k));
        }
        for c in shifts {
            let shifted = self.shift_poly(poly, &c);
            let v0 = match self.val_at(lvl, &shifted[0]) {
                Some(v) => v,
                None => continue,
            };
            let k = &v0 * qi(e_low as i64);
            if !k.is_integer() || k <= Q::zero() {
                continue;
            }
            let ki = k.to_integer();
            if ki.gcd(&BigInt::from(m)) != BigInt::one() {
                continue;
            }
            let ok = (1..m).all(|i| match self.val_at(lvl, &shifted[i]) {
                None => true,
                Some(v) => v >= &v0 * qi((m - i) as i64) / qi(m as i64),
            });
            if ok {
                return Some((
                    Certificate::Eisenstein { shift: c, slope: k / qi(m as i64) },
                    Some(e_low * m as u64),
                    self.res_deg,
                ));
            }
        }
        None
    }

    /// Integral rational coefficients, irreducible reduction, prime residue field below.
    fn unramified(&self, m: usize, poly: &[Vec<Q>]) -> Option<(Certificate, Option<u64>, u64)> {
        if self.res_deg != 1 || self.ram.is_none() {
            return None;
        }
        let p = self.prime;
        let mut red = Vec::with_capacity(m + 1);
        for c in poly {
            if c.iter().skip(1).any(|x| !x.is_zero()) {
                return None;
            }
            let x = &c[0];
            if vp(x, p).is_some_and(|v| v < 0) {
                return None;
            }
            red.push(mod_p(x, p)?);
        }
        red.push(1);
        if !fp_irreducible(&red, p) {
            return None;
        }
        Some((Certificate::Unramified, self.ram, self.res_deg * m as u64))
    }

    /// Decides the ramification index of a unit-Hensel wild step by probing
    /// valuations of `g - c`; leaves it unknown when the probe is inconclusive.
    fn probe_ramification(&mut self) {
        let lvl = self.level();
        let m = self.steps[lvl - 1].degree as i64;
        let p = self.prime as i64;
        let mut denom_lcm = BigInt::one();
        for c in -p..=p {
            let mut x = vec![Q::zero(); self.degree()];
            x[0] = qi(-c);
            x[self.dims[lvl - 1]] = Q::one();
            if let Some(v) = self.val_at(lvl, &x) {
                denom_lcm = denom_lcm.lcm(v.denom());
            }
        }
        if denom_lcm == BigInt::from(m) {
            self.ram = Some(m as u64);
            self.res_deg = 1;
            if let Certificate::UnitHensel { ramification_exact } = &mut self.steps[lvl - 1].certificate {
                *ramification_exact = true;
            }
        }
    }

    fn shift_poly(&self, poly: &[Vec<Q>], c: &Q) -> Vec<Vec<Q>> {
        let m = poly.len();
        let d = self.degree();
        let mut full: Vec<Vec<Q>> = poly.to_vec();
        let mut one = vec![Q::zero(); d];
        one[0] = Q::one();
        full.push(one);
        let mut out = vec![vec![Q::zero(); d]; m + 1];
        for (i, fi) in full.iter().enumerate() {
            for (k, slot) in out.iter_mut().enumerate().take(i + 1) {
                let coef = qi(rat::binom(&BigInt::from(i), k).to_i64().unwrap()) * rat::pow_q(c, (i - k) as i64);
                if coef.is_zero() {
                    continue;
                }
                for (s, x) in slot.iter_mut().zip(fi) {
                    *s += x * &coef;
                }
            }
        }
        out.truncate(m);
        out
    }

    fn mul_at(&self, lvl: usize, a: &[Q], b: &[Q]) -> Vec<Q> {
        if lvl == 0 {
            return vec![&a[0] * &b[0]];
        }
        let step = &self.steps[lvl - 1];
        let m = step.degree;
        let d = self.dims[lvl - 1];
        let zero_block = |x: &[Q]| x.iter().all(Zero::is_zero);
        let mut prod: Vec<Option<Vec<Q>>> = vec![None; 2 * m - 1];
        for i in 0..m {
            let ai = &a[i * d..(i + 1) * d];
            if zero_block(ai) {
                continue;
            }
            for j in 0..m {
                let bj = &b[j * d..(j + 1) * d];
                if zero_block(bj) {
                    continue;
                }
                let t = self.mul_at(lvl - 1, ai, bj);
                add_into(&mut prod[i + j], &t);
            }
        }
        for k in (m..2 * m - 1).rev() {
            if let Some(t) = prod[k].take() {
                for (i, c) in step.poly.iter().enumerate() {
                    if zero_block(c) {
                        continue;
                    }
                    let u = self.mul_at(lvl - 1, &t, c);
                    let neg: Vec<Q> = u.into_iter().map(|x| -x).collect();
                    add_into(&mut prod[k - m + i], &neg);
                }
            }
        }
        let mut out = Vec::with_capacity(m * d);
        for slot in prod.into_iter().take(m) {
            match slot {
                Some(v) => out.extend(v),
                None => out.extend(std::iter::repeat_n(Q::zero(), d)),
            }
        }
        out
    }

    /// Valuation of a level-`lvl` element; `None` for zero.
    fn val_at(&self, lvl: usize, a: &[Q]) -> Option<Q> {
        if lvl == 0 {
            return vp(&a[0], self.prime).map(qi);
        }
        let step = &self.steps[lvl - 1];
        let d = self.dims[lvl - 1];
        let mut terms: Vec<Q> = Vec::new();
        for k in 0..step.degree {
            if let Some(v) = self.val_at(lvl - 1, &a[k * d..(k + 1) * d]) {
                terms.push(v + &step.gen_val * qi(k as i64));
            }
        }
        if terms.is_empty() {
            return None;
        }
        let min = terms.iter().min().unwrap().clone();
        if terms.iter().filter(|v| **v == min).count() == 1 {
            return Some(min);
        }
        Some(self.norm_valuation(lvl, a))
    }

    /// `v_p(det M_a) / dim` over the level-`lvl` subtower.
    fn norm_valuation(&self, lvl: usize, a: &[Q]) -> Q {
        let det = self.norm_at(lvl, a);
        qi(vp(&det, self.prime).expect("nonzero element has nonzero norm")) / qi(self.dims[lvl] as i64)
    }

    fn norm_at(&self, lvl: usize, a: &[Q]) -> Q {
        let n = self.dims[lvl];
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![Q::zero(); n];
            e[j] = Q::one();
            cols.push(self.mul_at(lvl, a, &e));
        }
        let rows: Vec<Vec<Q>> = (0..n).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
        det_q(rows)
    }

    fn inv_at(&self, lvl: usize, a: &[Q]) -> Option<Vec<Q>> {
        let n = self.dims[lvl];
        let nz: Vec<usize> = (0..n).filter(|&i| !a[i].is_zero()).collect();
        if nz.is_empty() {
            return None;
        }
        if nz == [0] {
            let mut out = vec![Q::zero(); n];
            out[0] = a[0].recip();
            return Some(out);
        }
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![Q::zero(); n];
            e[j] = Q::one();
            cols.push(self.mul_at(lvl, a, &e));
        }
        let mut m: Vec<Vec<Q>> = (0..n)
            .map(|i| {
                let mut row: Vec<Q> = cols.iter().map(|c| c[i].clone()).collect();
                row.push(if i == 0 { Q::one() } else { Q::zero() });
                row
            })
            .collect();
        solve_in_place(&mut m, n)
    }

    /// Lifts an element of a prefix subtower.
    pub fn embed(self: &Arc<Self>, x: &Elem) -> Elem {
        let lvl = x.tower.level();
        assert!(
            lvl <= self.level()
                && x.tower.prime == self.prime
                && x.tower.steps.iter().zip(&self.steps).all(|(a, b)| a.poly == b.poly),
            "embed: not a prefix subtower"
        );
        let mut c = x.c.clone();
        c.resize(self.degree(), Q::zero());
        Elem { tower: self.clone(), c }
    }

    pub fn describe(&self) -> TowerDesc {
        TowerDesc {
            prime: self.prime,
            steps: self
                .steps
                .iter()
                .map(|s| StepDesc {
                    name: s.name.clone(),
                    exponent: s.degree,
                    radicand: s.radicand.clone(),
                    poly: if s.radicand.is_some() { None } else { Some(s.poly.clone()) },
                })
                .collect(),
        }
    }

    pub fn from_desc(desc: &TowerDesc) -> Result<Arc<Tower>, TowerError> {
        let mut t = Tower::base(desc.prime)?;
        for s in &desc.steps {
            let d = t.degree();
            t = match (&s.radicand, &s.poly) {
                (Some(r), _) => {
                    if r.len() != d {
                        return Err(TowerError::Malformed(format!(
                            "radicand of {} has {} coordinates, expected {d}",
                            s.name,
                            r.len()
                        )));
                    }
                    let r = Elem { tower: t.clone(), c: r.clone() };
                    t.adjoin_radical(&s.name, s.exponent, &r)?
                }
                (None, Some(poly)) => {
                    if poly.len() != s.exponent || poly.iter().any(|c| c.len() != d) {
                        return Err(TowerError::Malformed(format!("polynomial of {} has the wrong shape", s.name)));
                    }
                    let coeffs: Vec<Elem> = poly.iter().map(|c| Elem { tower: t.clone(), c: c.clone() }).collect();
                    t.adjoin_poly(&s.name, &coeffs)?
                }
                (None, None) => {
                    return Err(TowerError::Malformed(format!("step {} has neither radicand nor polynomial", s.name)))
                }
            };
        }
        Ok(t)
    }

    /// A uniformizer among small monomials in the generators and `g - c`.
    pub fn uniformizer(self: &Arc<Self>) -> Option<Elem> {
        let e = self.ram?;
        let target = Q::new(BigInt::one(), BigInt::from(e));
        let mut cands: Vec<Elem> = vec![Elem::from_int(self, self.prime as i64)];
        for (i, s) in self.steps.iter().enumerate() {
            let g = Elem::generator(self, i);
            if let Certificate::Eisenstein { shift, .. } = &s.certificate {
                cands.push(&g - &Elem::from_q(self, shift.clone()));
            }
            cands.push(g.clone());
            for c in 1..=2 {
                cands.push(&g - &Elem::from_int(self, c));
                cands.push(&g + &Elem::from_int(self, c));
            }
        }
        let vals: Vec<(Elem, Q)> = cands.into_iter().filter_map(|c| c.valuation().ok().map(|v| (c, v))).collect();
        if let Some((c, _)) = vals.iter().find(|(_, v)| *v == target) {
            return Some(c.clone());
        }
        // Small products c1^i c2^j p^k.
        for (a, va) in &vals {
            for (b, vb) in &vals {
                for i in 0..=(e as i64) {
                    for j in -(e as i64)..=(e as i64) {
                        let v = va * qi(i) + vb * qi(j);
                        let k = &target - &v;
                        if k.is_integer() {
                            let k = k.to_integer().to_i64()?;
                            return Some(&(&a.pow(i) * &b.pow(j)) * &Elem::from_int(self, self.prime as i64).pow(k));
                        }
                    }
                }
            }
        }
        None
    }

    /// Representatives of the residue field: `0..p` when it is prime, or
    /// combinations of powers of the unramified generator.
    pub fn residue_reps(self: &Arc<Self>) -> Vec<Elem> {
        let p = self.prime as i64;
        let ur: Option<usize> = self.steps.iter().position(|s| s.certificate == Certificate::Unramified);
        match ur {
            None => (0..p).map(|c| Elem::from_int(self, c)).collect(),
            Some(i) => {
                let g = Elem::generator(self, i);
                let m = self.steps[i].degree;
                let mut out = vec![Elem::from_int(self, 0)];
                for _ in 0..m {
                    out = out
                        .iter()
                        .flat_map(|x| (0..p).map(move |c| (x.clone(), c)))
                        .map(|(x, c)| &(&x * &g) + &Elem::from_int(self, c))
                        .collect();
                }
                out
            }
        }
    }
}

fn add_into(slot: &mut Option<Vec<Q>>, t: &[Q]) {
    match slot {
        Some(v) => {
            for (x, y) in v.iter_mut().zip(t) {
                *x += y;
            }
        }
        None => *slot = Some(t.to_vec()),
    }
}

/// Exact determinant by fraction-free elimination after clearing row denominators.
pub fn det_q(rows: Vec<Vec<Q>>) -> Q {
    let n = rows.len();
    let mut scale = Q::one();
    let mut m: Vec<Vec<BigInt>> = rows
        .into_iter()
        .map(|row| {
            let l = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            scale *= Q::from_integer(l.clone());
            row.iter().map(|x| (x * Q::from_integer(l.clone())).to_integer()).collect()
        })
        .collect();
    let mut sign = 1i32;
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return Q::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = t / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let det = if n == 0 { BigInt::one() } else { m[n - 1][n - 1].clone() };
    let det = if sign < 0 { -det } else { det };
    Q::from_integer(det) / scale
}

/// Gauss-Jordan on an augmented `n x (n+1)` matrix.
fn solve_in_place(m: &mut [Vec<Q>], n: usize) -> Option<Vec<Q>> {
    for k in 0..n {
        let piv = (k..n).find(|&r| !m[r][k].is_zero())?;
        m.swap(k, piv);
        let inv = m[k][k].recip();
        for x in m[k].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n {
            if i != k && !m[i][k].is_zero() {
                let f = m[i][k].clone();
                let rowk = m[k].clone();
                for (x, y) in m[i].iter_mut().zip(&rowk) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(m.iter().map(|r| r[n].clone()).collect())
}

fn mod_p(x: &Q, p: u64) -> Option<u64> {
    let pb = BigInt::from(p);
    let n = x.numer().mod_floor(&pb);
    let d = x.denom().mod_floor(&pb);
    if d.is_zero() {
        return None;
    }
    let dinv = modinv(&d, &pb)?;
    ((n * dinv).mod_floor(&pb)).to_u64()
}

fn modinv(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// Integer representative of a rational `p`-adic unit modulo `p^n`.
pub fn unit_mod(x: &Q, p: u64, n: u32) -> BigInt {
    let m = rat::ppow(p, n);
    let d = modinv(&x.denom().mod_floor(&m), &m).expect("unit_mod of a non-unit");
    (x.numer() * d).mod_floor(&m)
}

/// Multiplicative order of `r mod p` divides `m`; returns the order of `r` in
/// `F_p^*` lifted to `x^m - r`: the residue degree of a root.
fn residue_order(r: &Q, p: u64, m: u64) -> Option<u64> {
    // x^m = r over F_p with p ∤ m: irreducible iff the root generates F_{p^m},
    // i.e. the smallest f with r^{(p^f-1)/m} = 1 in F_{p^f} is m. Decide by
    // testing irreducibility of the reduction directly.
    let rr = mod_p(r, p)?;
    let mut poly = vec![0u64; m as usize + 1];
    poly[0] = (p - rr) % p;
    poly[m as usize] = 1;
    if fp_irreducible(&poly, p) {
        Some(m)
    } else {
        Some(0)
    }
}

fn fp_trim(a: &mut Vec<u64>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
}

fn fp_mulmod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    fp_rem(&prod, f, p)
}

fn fp_rem(a: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    fp_trim(&mut r);
    let df = f.len() - 1;
    let lead_inv = fp_inv(f[df], p);
    while r.len() > df && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let c = r[dr] * lead_inv % p;
        for i in 0..=df {
            let idx = dr - df + i;
            r[idx] = (r[idx] + p * p - c * f[i] % p) % p;
        }
        fp_trim(&mut r);
        if r.len() - 1 < df {
            break;
        }
    }
    r
}

fn fp_inv(a: u64, p: u64) -> u64 {
    let mut r = 1u64;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    fp_trim(&mut x);
    fp_trim(&mut y);
    while !(y.len() == 1 && y[0] == 0) {
        let r = fp_rem(&x, &y, p);
        x = y;
        y = r;
    }
    x
}

/// Ben-Or irreducibility test over `F_p` for a monic polynomial given low-to-high.
pub fn fp_irreducible(f: &[u64], p: u64) -> bool {
    let deg = f.len() - 1;
    if deg == 0 {
        return false;
    }
    let mut xp = vec![0, 1];
    for _ in 1..=deg / 2 {
        // xp <- xp^p mod f
        let mut acc = vec![1u64];
        let mut base = xp.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = fp_mulmod(&acc, &base, f, p);
            }
            base = fp_mulmod(&base, &base, f, p);
            e >>= 1;
        }
        xp = acc;
        let mut h = xp.clone();
        if h.len() < 2 {
            h.resize(2, 0);
        }
        h[1] = (h[1] + p - 1) % p;
        fp_trim(&mut h);
        let g = fp_gcd(f, &h, p);
        if g.len() > 1 {
            return false;
        }
    }
    true
}

/// Whether the rational `u` is an `m`-th power in `Q_p`.
///
/// The unit part is tested modulo `p^N` with `N = 2 v_p(m) + 1 + depth`
/// (`2 v_2(m) + 3 + depth` for `p = 2`); Hensel's lemma makes a solution
/// there lift.
pub fn is_mth_power(u: &Q, m: u64, p: u64, depth: u32) -> Result<bool, TowerError> {
    if u.is_zero() {
        return Err(TowerError::ZeroElement);
    }
    assert!(m >= 2, "is_mth_power needs m >= 2");
    let (k, w) = rat::split_unit(u, p);
    if k.rem_euclid(m as i64) != 0 {
        return Ok(false);
    }
    let kv = vp_int(&BigInt::from(m), p).unwrap() as u32;
    let n = if p == 2 { 2 * kv + 3 + depth } else { 2 * kv + 1 + depth };
    let modulus = rat::ppow(p, n);
    let w = unit_mod(&w, p, n);
    if p == 2 {
        if m % 2 == 1 {
            return Ok(true);
        }
        if w.mod_floor(&BigInt::from(4)) != BigInt::one() {
            return Ok(false);
        }
        let ord = rat::ppow(2, n - 2);
        let g = BigInt::from(m).gcd(&ord);
        return Ok(w.modpow(&(&ord / g), &modulus).is_one());
    }
    let phi = rat::ppow(p, n - 1) * BigInt::from(p - 1);
    let g = BigInt::from(m).gcd(&phi);
    Ok(w.modpow(&(&phi / g), &modulus).is_one())
}

/// Square classes over the maximal unramified extension `K_0` of `Q_2`:
/// for rational `d`, whether `d·i` and `d` are squares in `K_2 = K_0(i)` and
/// `K_3 = K_0(ζ_8)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SquareClassReport {
    pub di_square_in_k2: bool,
    pub di_square_in_k3: bool,
    pub d_square_in_k2: bool,
    pub d_square_in_k3: bool,
}

/// `x ∈ Q` is a square in `K_0` iff `v_2(x)` is even and the unit part is 1 mod 4
/// (the unramified quadratic extension of `Q_2` is `Q_2(√5)`).
fn square_in_k0(x: &Q) -> bool {
    let (k, u) = rat::split_unit(x, 2);
    k % 2 == 0 && unit_mod(&u, 2, 2) == BigInt::one()
}

/// `x ∈ Q` is a square in `K_0(i)` iff `±x` is a square in `K_0`.
fn square_in_k2(x: &Q) -> bool {
    square_in_k0(x) || square_in_k0(&-x)
}

pub fn square_class_k2_k3(p: u64, d: &Q, i_sign: i8) -> Result<SquareClassReport, TowerError> {
    if p != 2 {
        return Err(TowerError::WrongPrime(p));
    }
    if d.is_zero() {
        return Err(TowerError::ZeroElement);
    }
    // (u + v i)^2 = d i forces u = ±v and d = ±2v^2; the sign of i only swaps the two cases.
    let _ = i_sign;
    let di_k2 = square_in_k2(&(d / qi(2)));
    let d_k2 = square_in_k2(d);
    // K_3 = K_2(√i): x ∈ K_2 is a square in K_3 iff x or x·i is a square in K_2.
    let d_k3 = d_k2 || di_k2;
    let di_k3 = di_k2 || d_k2;
    Ok(SquareClassReport { di_square_in_k2: di_k2, di_square_in_k3: di_k3, d_square_in_k2: d_k2, d_square_in_k3: d_k3 })
}

/// An element of a tower.
#[derive(Clone)]
pub struct Elem {
    pub tower: Arc<Tower>,
    pub c: Vec<Q>,
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.tower;
        let mut parts = Vec::new();
        for (idx, c) in self.c.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut mono = Vec::new();
            // Decompose idx with the top generator slowest.
            let mut r = idx;
            for lvl in (0..t.steps.len()).rev() {
                let k = r / t.dims[lvl];
                r %= t.dims[lvl];
                match k {
                    0 => {}
                    1 => mono.push(t.steps[lvl].name.clone()),
                    _ => mono.push(format!("{}^{}", t.steps[lvl].name, k)),
                }
            }
            mono.reverse();
            let coef = if c.is_integer() { c.to_integer().to_string() } else { format!("({})", fmt_q(c)) };
            if mono.is_empty() {
                parts.push(coef);
            } else if c.is_one() {
                parts.push(mono.join("*"));
            } else {
                parts.push(format!("{}*{}", coef, mono.join("*")));
            }
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

impl PartialEq for Elem {
    fn eq(&self, other: &Self) -> bool {
        *self.tower == *other.tower && self.c == other.c
    }
}

impl Elem {
    pub fn from_q(t: &Arc<Tower>, x: Q) -> Elem {
        let mut c = vec![Q::zero(); t.degree()];
        c[0] = x;
        Elem { tower: t.clone(), c }
    }

    pub fn from_int(t: &Arc<Tower>, x: i64) -> Elem {
        Elem::from_q(t, qi(x))
    }

    pub fn zero(t: &Arc<Tower>) -> Elem {
        Elem::from_int(t, 0)
    }

    pub fn one(t: &Arc<Tower>) -> Elem {
        Elem::from_int(t, 1)
    }

    /// The generator adjoined at step `i`, lifted to the whole tower.
    pub fn generator(t: &Arc<Tower>, i: usize) -> Elem {
        let mut c = vec![Q::zero(); t.degree()];
        c[t.dims[i]] = Q::one();
        Elem { tower: t.clone(), c }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    /// The rational value if the element lies in the base field.
    pub fn as_rational(&self) -> Option<Q> {
        if self.c.iter().skip(1).all(Zero::is_zero) {
            Some(self.c[0].clone())
        } else {
            None
        }
    }

    pub fn valuation(&self) -> Result<Q, TowerError> {
        self.tower.val_at(self.tower.level(), &self.c).ok_or(TowerError::ZeroElement)
    }

    /// Valuation, `None` for zero (reported as +∞ by callers).
    pub fn val(&self) -> Option<Q> {
        self.tower.val_at(self.tower.level(), &self.c)
    }

    /// Exact norm to the rationals.
    pub fn norm(&self) -> Q {
        self.tower.norm_at(self.tower.level(), &self.c)
    }

    pub fn inv(&self) -> Result<Elem, TowerError> {
        let c = self.tower.inv_at(self.tower.level(), &self.c).ok_or(TowerError::ZeroElement)?;
        Ok(Elem { tower: self.tower.clone(), c })
    }

    pub fn pow(&self, k: i64) -> Elem {
        let mut base = if k < 0 { self.inv().expect("negative power of zero") } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Elem::one(&self.tower);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn scale(&self, x: &Q) -> Elem {
        Elem { tower: self.tower.clone(), c: self.c.iter().map(|y| y * x).collect() }
    }

    fn check(&self, other: &Elem) {
        assert!(
            Arc::ptr_eq(&self.tower, &other.tower) || *self.tower == *other.tower,
            "arithmetic across different towers"
        );
    }
}

impl<'a> std::ops::Add<&'a Elem> for &'a Elem {
    type Output = Elem;
    fn add(self, o: &Elem) -> Elem {
        self.check(o);
        Elem { tower: self.tower.clone(), c: self.c.iter().zip(&o.c).map(|(x, y)| x + y).collect() }
    }
}

impl<'a> std::ops::Sub<&'a Elem> for &'a Elem {
    type Output = Elem;
    fn sub(self, o: &Elem) -> Elem {
        self.check(o);
        Elem { tower: self.tower.clone(), c: self.c.iter().zip(&o.c).map(|(x, y)| x - y).collect() }
    }
}

impl<'a> std::ops::Mul<&'a Elem> for &'a Elem {
    type Output = Elem;
    fn mul(self, o: &Elem) -> Elem {
        self.check(o);
        let t = &self.tower;
        Elem { tower: t.clone(), c: t.mul_at(t.level(), &self.c, &o.c) }
    }
}

impl std::ops::Neg for &Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        Elem { tower: self.tower.clone(), c: self.c.iter().map(|x| -x).collect() }
    }
}

/// Serializable tower description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerDesc {
    pub prime: u64,
    pub steps: Vec<StepDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDesc {
    pub name: String,
    pub exponent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_qvec")]
    pub radicand: Option<Vec<Q>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_qmat")]
    pub poly: Option<Vec<Vec<Q>>>,
}

mod opt_qvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Vec<Q>>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&v.iter().map(fmt_q).collect::<Vec<_>>()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Q>>, D::Error> {
        let v = Option::<Vec<String>>::deserialize(d)?;
        v.map(|v| v.iter().map(|s| rat::parse_q(s).map_err(serde::de::Error::custom)).collect()).transpose()
    }
}

mod opt_qmat {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Vec<Vec<Q>>>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(m) => s.serialize_some(&m.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<Q>>>, D::Error> {
        let v = Option::<Vec<Vec<String>>>::deserialize(d)?;
        v.map(|m| {
            m.iter().map(|r| r.iter().map(|s| rat::parse_q(s).map_err(serde::de::Error::custom)).collect()).collect()
        })
        .transpose()
    }
}

/// Spec-level constructor: steps given as `(m, radicand)` with rational radicands
/// lifted into the tower built so far.
pub fn make_tower(p: u64, steps: &[(usize, Q)]) -> Result<Arc<Tower>, TowerError> {
    let mut t = Tower::base(p)?;
    for (i, (m, r)) in steps.iter().enumerate() {
        let r = Elem::from_q(&t, r.clone());
        t = t.adjoin_radical(&format!("g{}", i + 1), *m, &r)?;
    }
    Ok(t)
}

/// `Q(ζ_{p^k})` via the cyclotomic polynomial `Φ_{p^k}`.
pub fn cyclotomic_tower(p: u64, k: u32) -> Result<Arc<Tower>, TowerError> {
    let base = Tower::base(p)?;
    let step = rat::ppow(p, k - 1).to_usize().unwrap();
    let m = step * (p as usize - 1);
    // Φ_{p^k}(x) = Σ_{j<p} x^{j p^{k-1}}; store the non-leading coefficients.
    let mut coeffs = vec![Elem::zero(&base); m];
    for j in 0..(p as usize - 1) {
        coeffs[j * step] = Elem::one(&base);
    }
    base.adjoin_poly(&format!("z{}", rat::ppow(p, k)), &coeffs)
}

impl Serialize for Elem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.c.iter().map(fmt_q).collect::<Vec<_>>().serialize(s)
    }
}

/// Signed helper used by callers that need `|x|` of a rational.
pub fn abs_q(x: &Q) -> Q {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::q;

    #[test]
    fn empty_tower_is_the_rationals() {
        let t = make_tower(5, &[]).unwrap();
        assert_eq!(t.degree(), 1);
        assert_eq!(Elem::from_int(&t, 5).valuation().unwrap(), qi(1));
    }

    #[test]
    fn eighth_root_of_five() {
        let t = make_tower(5, &[(8, qi(5))]).unwrap();
        assert_eq!(t.degree(), 8);
        assert_eq!(Elem::generator(&t, 0).valuation().unwrap(), q(1, 8));
        assert_eq!(t.ramification_index(), Some(8));
    }

    #[test]
    fn gaussian_integers_at_two() {
        let t = make_tower(2, &[(2, qi(-1))]).unwrap();
        assert_eq!(t.degree(), 2);
        assert!(matches!(t.steps()[0].certificate, Certificate::UnitHensel { ramification_exact: true }));
        assert_eq!(t.ramification_index(), Some(2));
        let i = Elem::generator(&t, 0);
        let im1 = &i - &Elem::one(&t);
        assert_eq!(im1.valuation().unwrap(), q(1, 2));
    }

    #[test]
    fn split_radical_is_rejected() {
        // 16 = 4^2 in Q_5, so x^2 - 16 is reducible.
        assert!(matches!(make_tower(5, &[(2, qi(16))]), Err(TowerError::IrreducibilityUnverified(_))));
    }

    #[test]
    fn cyclotomic_uniformizer_valuation() {
        for p in [3u64, 5, 7] {
            let t = cyclotomic_tower(p, 1).unwrap();
            let z = Elem::generator(&t, 0);
            let v = (&z - &Elem::one(&t)).valuation().unwrap();
            assert_eq!(v, q(1, p as i64 - 1));
        }
    }

    #[test]
    fn inverse_round_trip() {
        let t = cyclotomic_tower(5, 1).unwrap();
        let z = Elem::generator(&t, 0);
        let x = &(&z * &z) + &Elem::from_int(&t, 3);
        let y = x.inv().unwrap();
        assert_eq!(&x * &y, Elem::one(&t));
    }

    #[test]
    fn mth_powers() {
        assert!(!is_mth_power(&qi(-1), 2, 2, 0).unwrap());
        assert!(is_mth_power(&qi(16), 2, 5, 0).unwrap());
        assert!(is_mth_power(&qi(17), 2, 2, 0).unwrap());
        assert!(!is_mth_power(&qi(2), 2, 5, 0).unwrap());
        assert!(is_mth_power(&q(1, 9), 2, 3, 0).unwrap());
    }

    #[test]
    fn square_class_table() {
        let r1 = square_class_k2_k3(2, &qi(1), 1).unwrap();
        assert!(r1.di_square_in_k3 && !r1.di_square_in_k2 && r1.d_square_in_k2);
        let r2 = square_class_k2_k3(2, &qi(2), 1).unwrap();
        assert!(r2.di_square_in_k2 && r2.d_square_in_k3);
        assert_eq!(square_class_k2_k3(2, &qi(4), 1).unwrap(), r1);
        assert_eq!(square_class_k2_k3(3, &qi(1), 1), Err(TowerError::WrongPrime(3)));
    }
}
