//! Ramification filtrations against independent computations.

mod common;

use num_traits::{One, Zero};
use rand::Rng;

use common::ramification::{brute_force_lower, exact_lower_index, phi_riemann, random_lower};
use common::{rng, v_p};
use padic_sr::ramification::{
    compositum_conductor, cyclotomic_filtration, tame_top_conductor, Filtration, Numbering, Profile,
};
use padic_sr::rat::{q, qi, Q};

#[test]
fn cyclotomic_lower_numbering_matches_enumeration() {
    for p in [2u64, 3, 5, 7, 11, 13] {
        for n in 1..=4u32 {
            let f = cyclotomic_filtration(p, n);
            assert_eq!(f.degree, (p - 1) * p.pow(n - 1));
            assert_eq!(f.lower().jumps, brute_force_lower(p, n), "p = {p}, n = {n}");
        }
    }
}

#[test]
fn cyclotomic_lower_index_in_exact_field() {
    for (p, n) in [(2u64, 2u32), (2, 3), (3, 1), (3, 2), (5, 1), (5, 2), (7, 1)] {
        for a in (2..p.pow(n)).filter(|a| a % p != 0) {
            let expect = p.pow(v_p(a - 1, p));
            assert_eq!(exact_lower_index(p, n, a), Some(qi(expect as i64)), "p = {p}, n = {n}, a = {a}");
        }
    }
}

#[test]
fn cyclotomic_upper_jumps_and_conductor() {
    for p in [2u64, 3, 5, 7, 11, 13] {
        for n in 1..=4u32 {
            let f = cyclotomic_filtration(p, n);
            let first = if p == 2 { 1 } else { 0 };
            let expect: Vec<Q> = (first..n as i64).map(qi).collect();
            assert_eq!(f.jump_set(), expect, "p = {p}, n = {n}");
            let cond = f.conductor();
            if p == 2 && n == 1 {
                assert_eq!(cond, None);
            } else {
                assert_eq!(cond, Some(qi(n as i64 - 1)));
            }
            // Upper numbering passes to the quotient K_{n-1}.
            if n > 1 {
                assert_eq!(f.quotient_by_last(), cyclotomic_filtration(p, n - 1));
            }
        }
    }
}

#[test]
fn herbrand_round_trips_on_random_filtrations() {
    let mut r = rng(5);
    for _ in 0..100 {
        let f = random_lower(&mut r);
        let up = f.herbrand_convert(Numbering::Upper).unwrap();
        assert_eq!(up.herbrand_convert(Numbering::Lower).unwrap(), f);
        assert_eq!(up.upper(), up);
        for (lj, uj) in f.jumps.iter().zip(&up.jumps) {
            assert_eq!(phi_riemann(&f, &lj.at), uj.at, "φ at lower jump {}", lj.at);
            assert_eq!(lj.order_after, uj.order_after);
        }
    }
}

#[test]
fn profile_psi_phi_are_inverse_and_match_cyclotomic_lower_jumps() {
    for p in [2u64, 3, 5, 7] {
        for c in 1..=4u32 {
            let prof = Profile::cyclotomic(p, c);
            let f = cyclotomic_filtration(p, c);
            let g0 = if p == 2 { p.pow(c - 1) } else { (p - 1) * p.pow(c - 1) } as i64;
            let lower = f.lower();
            for (u, l) in f.jumps.iter().zip(&lower.jumps) {
                if u.at > qi(0) {
                    assert_eq!(prof.psi(&u.at) * qi(g0), l.at, "p = {p}, c = {c}");
                }
            }
        }
    }
    let mut r = rng(6);
    for _ in 0..100 {
        let p = [2u64, 3, 5][r.gen_range(0..3)];
        let mut prof = Profile::base(p);
        let mut h = Q::zero();
        for _ in 0..r.gen_range(0..4) {
            h = &h + q(r.gen_range(1..9), r.gen_range(1..4));
            prof.push(h.clone(), Some(r.gen_range(1..3)));
        }
        let y = q(r.gen_range(0..40), r.gen_range(1..6));
        assert_eq!(prof.psi(&prof.phi(&y)), y);
        assert_eq!(prof.phi(&prof.psi(&y)), y);
    }
}

#[test]
fn compositum_and_tame_laws() {
    let mut r = rng(7);
    let rand_q = |r: &mut rand_chacha::ChaCha8Rng| q(r.gen_range(0..60), r.gen_range(1..8));
    for _ in 0..100 {
        let xs: Vec<Q> = (0..r.gen_range(1..6)).map(|_| rand_q(&mut r)).collect();
        let c = compositum_conductor(&xs).unwrap();
        assert!(xs.iter().all(|x| *x <= c) && xs.contains(&c), "least upper bound");
        let mut rev = xs.clone();
        rev.reverse();
        assert_eq!(compositum_conductor(&rev).unwrap(), c, "commutative");
        let (l, rt) = xs.split_at(xs.len() / 2);
        let nested: Vec<Q> =
            [l, rt].iter().filter(|part| !part.is_empty()).map(|part| compositum_conductor(part).unwrap()).collect();
        assert_eq!(compositum_conductor(&nested).unwrap(), c, "associative");
        assert_eq!(compositum_conductor(&[c.clone(), c.clone()]).unwrap(), c, "idempotent");
        let extra = rand_q(&mut r);
        assert!(compositum_conductor(&[xs.clone(), vec![extra]].concat()).unwrap() >= c, "monotone");
        assert_eq!(tame_top_conductor(&c), c, "tame top");
    }
    assert!(compositum_conductor(&[]).is_err());
    assert!(compositum_conductor(&[-Q::one()]).is_err());
    // A tame extension on top keeps the wild upper jumps.
    let f = cyclotomic_filtration(5, 3);
    let t = Filtration::tame(4);
    assert_eq!(t.conductor(), Some(qi(0)));
    assert_eq!(compositum_conductor(&[f.conductor().unwrap(), t.conductor().unwrap()]).unwrap(), qi(2));
}
