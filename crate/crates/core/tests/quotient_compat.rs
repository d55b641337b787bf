//! Stable graphs of the quotient covers `Y/Q_j` sit inside the full stable graph.

mod common;

use padic_sr::config::RunConfig;

#[test]
fn quotient_graphs_embed_for_random_specs() {
    let cfg = RunConfig::default();
    for spec in common::quotient_specs(8) {
        for j in 1..spec.s {
            let matched = common::quotient_embeds(&spec, j, &cfg).unwrap();
            assert!(matched >= 2);
        }
    }
}

#[test]
fn a_wrong_inertia_shift_is_detected() {
    let cfg = RunConfig::default();
    let spec = common::random_cover(&mut common::rng(10), 5, 3, 2);
    let q1 = spec.quotient(1).unwrap();
    assert!(common::embeds_with_shift(&spec, &q1, 1, &cfg).is_ok());
    assert!(common::embeds_with_shift(&spec, &q1, 0, &cfg).is_err());
    assert!(common::embeds_with_shift(&spec, &q1, 2, &cfg).is_err());
}
