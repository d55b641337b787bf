//! Exhaustive check of the deformation-datum signature solver for `m ≤ 12`.

mod common;

use padic_sr::metacyclic::{signature_solver, MetacyclicError, MetacyclicSpec};
use padic_sr::rat::{q, qi, Q};

use common::{enumerate_signatures, prime_one_mod, triples};

fn sigmas(spec: &MetacyclicSpec) -> Result<[Q; 3], MetacyclicError> {
    signature_solver(spec).map(|s| s.points.clone().map(|x| x.sigma.0))
}

#[test]
fn solver_agrees_with_enumeration() {
    let mut solved = 0;
    for m in 2..=12u64 {
        let p = prime_one_mod(m);
        for a in triples(m) {
            let spec = MetacyclicSpec::new(p, 1, m, a).unwrap();
            let all = enumerate_signatures(m, a);
            match sigmas(&spec) {
                Ok(s) => {
                    assert_eq!(all, vec![s.clone()], "m = {m}, a = {a:?}: exactly one solution");
                    assert_eq!(s.iter().sum::<Q>(), qi(1));
                    solved += 1;
                }
                Err(MetacyclicError::NoSolution(_)) => {
                    assert!(all.is_empty(), "m = {m}, a = {a:?}: solver missed {all:?}");
                    let flipped = a.map(|x| (m as i64 - x) % m as i64);
                    let f = MetacyclicSpec::new(p, 1, m, flipped).unwrap();
                    assert!(sigmas(&f).is_ok(), "m = {m}: flip of {a:?} is solvable");
                }
                Err(e) => panic!("m = {m}, a = {a:?}: {e}"),
            }
        }
    }
    assert!(solved > 100);
}

#[test]
fn solutions_are_permutation_and_representative_invariant() {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for m in 2..=12u64 {
        let p = prime_one_mod(m);
        let mi = m as i64;
        for a in triples(m) {
            let Ok(base) = sigmas(&MetacyclicSpec::new(p, 1, m, a).unwrap()) else { continue };
            for perm in PERMS {
                let b = perm.map(|i| a[i]);
                let s = sigmas(&MetacyclicSpec::new(p, 1, m, b).unwrap()).unwrap();
                assert_eq!(s, perm.map(|i| base[i].clone()));
            }
            for shift in [[mi, -mi, 0], [-3 * mi, 0, 5 * mi], [2 * mi, 2 * mi, -4 * mi]] {
                let b = [a[0] + shift[0], a[1] + shift[1], a[2] + shift[2]];
                assert_eq!(sigmas(&MetacyclicSpec::new(p, 1, m, b).unwrap()).unwrap(), base);
            }
            // The level n of Z/p^n plays no role.
            assert_eq!(sigmas(&MetacyclicSpec::new(p, 3, m, a).unwrap()).unwrap(), base);
        }
    }
}

#[test]
fn worked_examples() {
    let s = sigmas(&MetacyclicSpec::new(3, 1, 2, [1, 1, 0]).unwrap()).unwrap();
    assert_eq!(s, [q(1, 2), q(1, 2), qi(0)]);
    let s = sigmas(&MetacyclicSpec::new(7, 1, 3, [1, 2, 0]).unwrap()).unwrap();
    assert_eq!(s, [q(1, 3), q(2, 3), qi(0)]);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(MetacyclicSpec::new(5, 1, 3, [1, 2, 0]), Err(MetacyclicError::NotFaithful { .. })));
    assert!(matches!(MetacyclicSpec::new(7, 1, 3, [1, 1, 0]), Err(MetacyclicError::SumNotZero { .. })));
    assert!(matches!(MetacyclicSpec::new(7, 1, 3, [3, 0, -3]), Err(MetacyclicError::AllZero(3))));
    assert!(matches!(MetacyclicSpec::new(6, 1, 1, [0, 0, 0]), Err(MetacyclicError::NotPrime(6))));
}
