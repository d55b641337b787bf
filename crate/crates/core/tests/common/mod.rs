//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod ramification;

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use padic_sr::config::RunConfig;
use padic_sr::cyclic::{branch_signature, build_stable_graph, center_label, CenterField, CoverSpec};
use padic_sr::rat::{parse_q, Q};
use padic_sr::tower::Elem;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random cover `y^{p^n} = x^a (x-1)^b` with `v(a) = v(a+b) = 0` and `v(b) = n - s`.
pub fn random_cover(rng: &mut ChaCha8Rng, p: u64, n: u32, s: u32) -> CoverSpec {
    let pk = p.pow(n - s);
    let a = loop {
        let a = rng.gen_range(1..400u64);
        if a % p != 0 {
            break a;
        }
    };
    let b = loop {
        let u = rng.gen_range(1..400u64);
        if u % p != 0 && !(a + pk * u).is_multiple_of(p) {
            break pk * u;
        }
    };
    let spec = branch_signature(p, n, &BigInt::from(a), &BigInt::from(b)).expect("admissible cover");
    assert_eq!(spec.s, s, "constructed ({p}, {n}, {a}, {b}) has the requested s");
    spec
}

/// `(n, s)` cells with at least one cover: `p = 2` has no `s = n` covers.
pub fn cells(p: u64, n_max: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        for s in 1..=n {
            if p == 2 && s == n {
                continue;
            }
            out.push((n, s));
        }
    }
    out
}

pub fn v_p(mut x: u64, p: u64) -> u32 {
    let mut v = 0;
    while x.is_multiple_of(p) {
        x /= p;
        v += 1;
    }
    v
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks that every component of the stable graph of `Y/Q_j` is a component
/// of the full graph: same disk (centers compared exactly, equal radii) and
/// inertia exponent `max(i - j, 0)`.
pub fn quotient_embeds(spec: &CoverSpec, j: u32, cfg: &RunConfig) -> Result<usize, String> {
    let quot = spec.quotient(j).map_err(|e| e.to_string())?;
    embeds_with_shift(spec, &quot, j, cfg)
}

/// The embedding check of `quot` into `spec` with inertia shifted by `j`.
pub fn embeds_with_shift(spec: &CoverSpec, quot: &CoverSpec, j: u32, cfg: &RunConfig) -> Result<usize, String> {
    let (full, _) = build_stable_graph(spec, cfg).map_err(|e| e.to_string())?;
    let (small, _) = build_stable_graph(quot, cfg).map_err(|e| e.to_string())?;
    let ks: Vec<u32> = (0..spec.s).collect();
    let field = CenterField::new(spec, &ks, false).map_err(|e| e.to_string())?;
    // Quotient center labels depend only on n - k, so both graphs share one label set.
    let center = |label: &str| -> Result<Elem, String> {
        if let Some(k) = ks.iter().find(|&&k| center_label(spec, k) == label) {
            return field.center(spec, *k).map_err(|e| e.to_string());
        }
        parse_q(label).map(|x| Elem::from_q(&field.tower, x)).map_err(|_| format!("unknown center {label}"))
    };
    let mut matched = 0;
    for qc in &small.components {
        let qd = qc.disk.as_ref().ok_or_else(|| format!("{} has no disk", qc.label))?;
        let qcen = center(&qd.center)?;
        let r: &Q = &qd.radius_valuation.0;
        let mut found = false;
        for fc in &full.components {
            let Some(fd) = fc.disk.as_ref() else { continue };
            if fd.radius_valuation.0 != *r {
                continue;
            }
            let same_disk = match (&center(&fd.center)? - &qcen).val() {
                None => true,
                Some(v) => v >= *r,
            };
            if same_disk && qc.inertia_exponent == fc.inertia_exponent.saturating_sub(j) {
                found = true;
                break;
            }
        }
        if !found {
            return Err(format!(
                "{:?}/Q_{j}: {} (center {}, radius {}, inertia {}) has no counterpart",
                (spec.p, spec.n, &spec.a, &spec.b),
                qc.label,
                qd.center,
                r,
                qc.inertia_exponent
            ));
        }
        matched += 1;
    }
    Ok(matched)
}

/// 20 deterministic random covers with `2 <= s < n`, for the quotient check.
pub fn quotient_specs(seed: u64) -> Vec<CoverSpec> {
    let mut r = rng(seed);
    let shapes: [(u64, u32, u32); 7] = [(2, 3, 2), (3, 3, 2), (5, 3, 2), (7, 3, 2), (3, 4, 2), (3, 4, 3), (5, 4, 3)];
    (0..20)
        .map(|i| {
            let (p, n, s) = shapes[i % shapes.len()];
            random_cover(&mut r, p, n, s)
        })
        .collect()
}

/// Smallest prime `p ≡ 1 mod m`, so that `Z/m` acts faithfully on `Z/p^n`.
pub fn prime_one_mod(m: u64) -> u64 {
    (2..).find(|&p: &u64| p % m == 1 % m && (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)).unwrap()
}

/// All exponent triples in `[0, m)^3` summing to `0 mod m`, not all zero.
pub fn triples(m: u64) -> Vec<[i64; 3]> {
    let m = m as i64;
    let mut out = Vec::new();
    for a in 0..m {
        for b in 0..m {
            let c = (2 * m - a - b) % m;
            if a + b + c > 0 {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Every `σ = (σ_1, σ_2, σ_3)` with `σ_i ∈ [0, 2)`, `m_i σ_i ≡ a_i / gcd(m, a_i) mod m_i`,
/// `σ_i = 0` at wild points and `Σ σ_i = 1`, by enumeration.
pub fn enumerate_signatures(m: u64, a: [i64; 3]) -> Vec<[Q; 3]> {
    use num_integer::Integer;
    let options: Vec<Vec<Q>> = a
        .iter()
        .map(|&ai| {
            let ai = ai.rem_euclid(m as i64) as u64;
            if ai == 0 {
                return vec![Q::from_integer(0.into())];
            }
            let g = m.gcd(&ai);
            let mi = m / g;
            (0..2 * mi)
                .filter(|h| h % mi == (ai / g) % mi)
                .map(|h| Q::new((h as i64).into(), (mi as i64).into()))
                .collect()
        })
        .collect();
    let one = Q::from_integer(1.into());
    let mut out = Vec::new();
    for x in &options[0] {
        for y in &options[1] {
            for z in &options[2] {
                if x + y + z == one {
                    out.push([x.clone(), y.clone(), z.clone()]);
                }
            }
        }
    }
    out
}
