//! Independent ramification computations used as oracles.

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use padic_sr::ramification::{Filtration, Jump, Numbering};
use padic_sr::rat::{q, qi, Q};
use padic_sr::tower::{cyclotomic_tower, Elem};

use super::{gcd, v_p};

/// Lower jumps of `Gal(Q_p(ζ_{p^n})/Q_p)` by enumerating `(Z/p^n)^×`:
/// `i(σ_a) = v_π(ζ^{a-1} - 1) = p^{v_p(a-1)}` for `a ≢ 1`.
pub fn brute_force_lower(p: u64, n: u32) -> Vec<Jump> {
    let pn = p.pow(n);
    let units: Vec<u64> = (1..pn).filter(|a| a % p != 0).collect();
    let index = |a: u64| -> Option<u64> { (a != 1).then(|| p.pow(v_p(a - 1, p))) };
    // |G_u| = #{σ : i(σ) ≥ u + 1}, for integer u ≥ 0.
    let order = |u: u64| units.iter().filter(|&&a| index(a).is_none_or(|i| i > u)).count() as u64;
    let mut jumps = Vec::new();
    let mut u = 0;
    let mut cur = order(0);
    while cur > 1 {
        let next = order(u + 1);
        if next < cur {
            jumps.push(Jump { at: qi(u as i64), order_after: next });
        }
        cur = next;
        u += 1;
    }
    jumps
}

/// `i(σ_a) = v(ζ^a - ζ)` computed in the exact field `Q(ζ_{p^n})`, in units of `v(π) = 1`.
pub fn exact_lower_index(p: u64, n: u32, a: u64) -> Option<Q> {
    let t = cyclotomic_tower(p, n).unwrap();
    let z = Elem::generator(&t, 0);
    let e = ((p - 1) * p.pow(n - 1)) as i64;
    (&z.pow(a as i64) - &z).val().map(|v| v * qi(e))
}

/// A random valid lower filtration of a group of order `m p^k`.
pub fn random_lower(rng: &mut ChaCha8Rng) -> Filtration {
    let p = [2u64, 3, 5, 7][rng.gen_range(0..4)];
    let k = rng.gen_range(0..5u32);
    let tame = loop {
        let m = rng.gen_range(1..7u64);
        if gcd(m, p) == 1 {
            break m;
        }
    };
    let mut jumps = Vec::new();
    let mut order = tame * p.pow(k);
    if tame > 1 {
        order = p.pow(k);
        jumps.push(Jump { at: qi(0), order_after: order });
    }
    let mut at = qi(0);
    let mut left = k;
    while left > 0 {
        let g = rng.gen_range(1..=left);
        left -= g;
        at = &at + q(rng.gen_range(1..12), rng.gen_range(1..5));
        order /= p.pow(g);
        jumps.push(Jump { at: at.clone(), order_after: order });
    }
    Filtration::new(tame * p.pow(k), Numbering::Lower, jumps).expect("valid random filtration")
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a as u64, b as u64) as i64 * b
}

/// `φ(u) = ∫_0^u |G_t| / |G_0| dt`, `G_0` the whole (inertia) group, as an exact Riemann sum on a grid fine enough
/// to make the integrand constant on every cell.
pub fn phi_riemann(f: &Filtration, u: &Q) -> Q {
    let den = f.jumps.iter().map(|j| j.at.denom().to_i64().unwrap()).chain([u.denom().to_i64().unwrap()]).fold(1, lcm);
    let h = q(1, den);
    let cells = (u * qi(den)).to_integer().to_i64().unwrap();
    let g0 = f.degree as i64;
    let mut acc = Q::zero();
    for c in 0..cells {
        let mid = &h * qi(c) + &h / qi(2);
        acc += &h * qi(f.order_at(&mid) as i64) / qi(g0);
    }
    acc
}
