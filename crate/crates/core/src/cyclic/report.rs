//! The end-to-end analysis of one cover.

use serde::Serialize;

use super::field::{conductor_bound, stab_field_tower, ConductorVerdict};
use super::stable::{build_stable_graph, InseparableTail, TailCertificate};
use super::{CoverError, CoverSpec};
use crate::config::RunConfig;
use crate::graph::{
    check_local_vanishing, check_vanishing_cycles, effective_different_profile, radius_checks, telescoping_sums,
    validate, ComponentKind, DecoratedGraph, Violation,
};
use crate::ramification::FieldTower;
use crate::rat::{qi, RatVal, Q};
use crate::series::VerdictKind;

/// Exact residuals of the graph identities; all zero for a consistent graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphChecks {
    pub violations: Vec<Violation>,
    pub vanishing_cycles_residual: RatVal,
    /// `(vertex, residual)` at each inseparable component.
    pub local_vanishing_residuals: Vec<(usize, RatVal)>,
    pub delta_at_original: RatVal,
    /// `(étale tail, Σ σ^eff ε)` along the path from the original component.
    pub telescoping: Vec<(usize, RatVal)>,
    pub delta_profile_error: Option<String>,
}

impl GraphChecks {
    pub fn run(g: &DecoratedGraph) -> Result<Self, CoverError> {
        let mut violations = validate(g);
        violations.extend(radius_checks(g));
        let p = g.prime as i64;
        let delta0 = qi(g.n as i64 - 1) + Q::new(p.into(), (p - 1).into());
        Ok(GraphChecks {
            violations,
            vanishing_cycles_residual: RatVal(check_vanishing_cycles(g)?),
            local_vanishing_residuals: check_local_vanishing(g)?.into_iter().map(|(v, r)| (v, RatVal(r))).collect(),
            delta_at_original: RatVal(delta0),
            telescoping: telescoping_sums(g)?.into_iter().map(|(v, s)| (v, RatVal(s))).collect(),
            delta_profile_error: effective_different_profile(g).err().map(|e| e.to_string()),
        })
    }

    pub fn passed(&self) -> bool {
        let zero = qi(0);
        self.violations.is_empty()
            && self.vanishing_cycles_residual.0 == zero
            && self.local_vanishing_residuals.iter().all(|(_, r)| r.0 == zero)
            && self.telescoping.iter().all(|(_, s)| *s == self.delta_at_original)
            && self.delta_profile_error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableModelReport {
    pub spec: CoverSpec,
    pub graph: DecoratedGraph,
    pub inseparable_tails: Vec<InseparableTail>,
    pub tail_certificates: Vec<TailCertificate>,
    pub tower: FieldTower,
    pub conductor: ConductorVerdict,
    pub moduli_field_note: String,
    pub graph_checks: GraphChecks,
    /// Every certificate splits, every graph check passes, and the conductor is below `n`.
    pub all_certified: bool,
}

pub fn inseparable_tails_of(g: &DecoratedGraph) -> Result<Vec<InseparableTail>, CoverError> {
    let r = g.rooted()?;
    let mut out = Vec::new();
    for c in &g.components {
        if c.kind != ComponentKind::Tail || c.inertia_exponent == 0 {
            continue;
        }
        let disk = c.disk.clone().ok_or(CoverError::UnsupportedCase("tail without a disk".into()))?;
        let sep = r
            .parent
            .get(&c.id)
            .and_then(|par| g.component(*par))
            .and_then(|x| x.disk.clone())
            .ok_or(CoverError::UnsupportedCase("tail without a parent disk".into()))?;
        out.push(InseparableTail {
            component: c.id,
            inertia_exponent: c.inertia_exponent,
            center: disk.center,
            radius_valuation: disk.radius_valuation,
            separation_valuation: sep.radius_valuation,
            contains_one: c.specialized_branch_points.iter().any(|b| b.point == "1"),
        });
    }
    Ok(out)
}

/// Stable reduction, certificates, field of definition and conductor of one cover.
pub fn analyze(spec: &CoverSpec, cfg: &RunConfig) -> Result<StableModelReport, CoverError> {
    let (graph, tail_certificates) = build_stable_graph(spec, cfg)?;
    let graph_checks = GraphChecks::run(&graph)?;
    let inseparable_tails = inseparable_tails_of(&graph)?;
    let tower = stab_field_tower(spec)?;
    let conductor = conductor_bound(spec, &tower)?;
    let (tower, _) = tower.annotated()?;
    let certified = tail_certificates.iter().all(|c| !matches!(c.verdict.kind, VerdictKind::NotCertified { .. }));
    let all_certified = certified && graph_checks.passed() && conductor.vanishes_at_n;
    Ok(StableModelReport {
        spec: spec.clone(),
        graph,
        inseparable_tails,
        tail_certificates,
        tower,
        conductor,
        moduli_field_note: format!(
            "field of moduli relative to K_0 is K_{n} = K_0(zeta_{p}^{n}); the stable model is defined over a tame extension of the tower",
            n = spec.n,
            p = spec.p
        ),
        graph_checks,
        all_certified,
    })
}
