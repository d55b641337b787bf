//! Property tests for the invariants that hold across inputs.

mod common;

use num_bigint::BigInt;
use num_traits::Zero;
use proptest::prelude::*;

use padic_sr::config::RunConfig;
use padic_sr::cyclic::{analyze, branch_signature, GraphChecks};
use padic_sr::graph::DecoratedGraph;
use padic_sr::metacyclic::{signature_solver, MetacyclicSpec, SignatureSolution};
use padic_sr::ramification::{Filtration, Jump, Numbering};
use padic_sr::rat::{fmt_q, parse_q, q, qi, Q};
use padic_sr::tower::{make_tower, Elem};

/// `v_p` of a nonzero rational, by trial division.
fn vp_rational(x: &Q, p: u64) -> Q {
    let count = |m: &BigInt| {
        let (mut m, mut v) = (m.clone(), 0i64);
        while (&m % p).is_zero() {
            m /= p;
            v += 1;
        }
        v
    };
    qi(count(x.numer()) - count(x.denom()))
}

fn rational() -> impl Strategy<Value = Q> {
    (-10_000i64..10_000, 1i64..500).prop_map(|(n, d)| q(n, d))
}

/// Lower filtration of order `tame · p^k` with the given wild steps `(increment, drop)`.
fn filtration() -> impl Strategy<Value = Filtration> {
    (
        prop::sample::select(vec![2u64, 3, 5]),
        prop::sample::select(vec![1u64, 2, 4]),
        prop::collection::vec(((1i64..20, 1i64..6), 1u32..3), 0..4),
    )
        .prop_map(|(p, tame, steps)| {
            let tame = if tame % p == 0 { 1 } else { tame };
            let k: u32 = steps.iter().map(|(_, g)| g).sum();
            let mut order = p.pow(k);
            let mut jumps = Vec::new();
            if tame > 1 {
                jumps.push(Jump { at: qi(0), order_after: order });
            }
            let mut at = qi(0);
            for ((num, den), g) in steps {
                at = &at + q(num, den);
                order /= p.pow(g);
                jumps.push(Jump { at: at.clone(), order_after: order });
            }
            Filtration::new(tame * p.pow(k), Numbering::Lower, jumps).unwrap()
        })
}

proptest! {
    #[test]
    fn rational_text_round_trips(x in rational()) {
        prop_assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
    }

    #[test]
    fn herbrand_functions_are_mutually_inverse(f in filtration()) {
        let up = f.herbrand_convert(Numbering::Upper).unwrap();
        prop_assert_eq!(up.lower(), f.clone());
        prop_assert_eq!(up.jumps.len(), f.jumps.len());
        // φ is increasing, so upper jumps stay strictly ordered and below the lower ones.
        for w in up.jumps.windows(2) {
            prop_assert!(w[0].at < w[1].at);
        }
        for (u, l) in up.jumps.iter().zip(&f.jumps) {
            prop_assert!(u.at <= l.at);
        }
        let json = serde_json::to_string(&f).unwrap();
        prop_assert_eq!(serde_json::from_str::<Filtration>(&json).unwrap(), f);
    }

    /// In `Q_p(p^{1/2}, p^{1/3})` the basis monomials have distinct valuations mod 1,
    /// so `v(Σ c_ij π_2^i π_3^j) = min v_p(c_ij) + i/2 + j/3`.
    #[test]
    fn tower_valuation_matches_monomial_minimum(
        p in prop::sample::select(vec![2u64, 3, 5, 7]),
        cs in prop::collection::vec(rational(), 6),
    ) {
        let t = make_tower(p, &[(2, qi(p as i64)), (3, qi(p as i64))]).unwrap();
        let (g2, g3) = (Elem::generator(&t, 0), Elem::generator(&t, 1));
        let mut x = Elem::zero(&t);
        let mut expect: Option<Q> = None;
        for (idx, c) in cs.iter().enumerate() {
            let (i, j) = (idx % 2, idx / 2);
            x = &x + &(&g2.pow(i as i64) * &g3.pow(j as i64)).scale(c);
            if !c.is_zero() {
                let v = vp_rational(c, p) + q(i as i64, 2) + q(j as i64, 3);
                expect = Some(expect.map_or(v.clone(), |e: Q| e.min(v)));
            }
        }
        prop_assert_eq!(x.val(), expect);
    }

    #[test]
    fn tower_valuation_is_multiplicative(
        p in prop::sample::select(vec![3u64, 5]),
        xs in prop::collection::vec(rational(), 3),
        ys in prop::collection::vec(rational(), 3),
    ) {
        let t = make_tower(p, &[(3, qi(2 * p as i64))]).unwrap();
        let g = Elem::generator(&t, 0);
        let build = |cs: &[Q]| cs.iter().enumerate().fold(Elem::zero(&t), |acc, (i, c)| &acc + &g.pow(i as i64).scale(c));
        let (x, y) = (build(&xs), build(&ys));
        match (x.val(), y.val()) {
            (Some(a), Some(b)) => {
                prop_assert_eq!((&x * &y).val(), Some(&a + &b));
                prop_assert_eq!(x.inv().unwrap().val(), Some(-a));
            }
            _ => prop_assert!((&x * &y).is_zero()),
        }
    }

    #[test]
    fn signatures_round_trip_through_json(m in 2u64..13, a in 0i64..12, b in 0i64..12) {
        let p = common::prime_one_mod(m);
        let trip = [a, b, -(a + b)];
        if let Ok(spec) = MetacyclicSpec::new(p, 1, m, trip) {
            if let Ok(sol) = signature_solver(&spec) {
                let json = serde_json::to_string(&sol).unwrap();
                prop_assert_eq!(serde_json::from_str::<SignatureSolution>(&json).unwrap(), sol);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Analyzer output satisfies every graph identity and survives a JSON round trip.
    #[test]
    fn analyzer_graphs_satisfy_the_identities(
        p in prop::sample::select(vec![2u64, 3, 5, 7]),
        n in 1u32..4,
        s_off in 0u32..3,
        seed in any::<u64>(),
    ) {
        let s = n.saturating_sub(s_off).max(1);
        prop_assume!(!(p == 2 && s == n));
        let spec = common::random_cover(&mut common::rng(seed), p, n, s);
        let report = analyze(&spec, &RunConfig::default()).unwrap();
        let checks = GraphChecks::run(&report.graph).unwrap();
        prop_assert!(checks.passed(), "{:?}: {:?}", (p, n, &spec.a, &spec.b), checks);
        let json = serde_json::to_string(&report.graph).unwrap();
        prop_assert_eq!(serde_json::from_str::<DecoratedGraph>(&json).unwrap(), report.graph);
    }

    /// Shifting exponents by multiples of `p^n` gives an isomorphic cover (`y -> y x^k (x-1)^{-k}`).
    #[test]
    fn branch_signature_is_stable_under_exponent_shift(
        p in prop::sample::select(vec![3u64, 5, 7]),
        n in 1u32..4,
        a in 1i64..200,
        b in 1i64..200,
        k in -3i64..3,
    ) {
        let pn = (p as i64).pow(n);
        let base = branch_signature(p, n, &BigInt::from(a), &BigInt::from(b));
        let shifted = branch_signature(p, n, &BigInt::from(a + k * pn), &BigInt::from(b - k * pn));
        match (base, shifted) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x.s, y.s);
                prop_assert_eq!(&x.a % pn, &y.a % pn);
                prop_assert_eq!(&x.b % pn, &y.b % pn);
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }
}
