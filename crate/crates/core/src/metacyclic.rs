//! Three-point covers with group `Z/p^n ⋊ Z/m`, `m > 1`, acting faithfully.
//!
//! Everything here depends only on `(p, n, m, a_1, a_2, a_3)`, where
//! `z^m = (x - x_1)^{a_1} (x - x_2)^{a_2} (x - x_3)^{a_3}` is the quotient
//! `Z/m`-cover, normalized so that the generator acts on `z` through `χ`.

use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::graph::{
    edge_pair, fill_sigma_eff, Augmented, BranchPoint, Component, ComponentKind, DecoratedGraph, Disk, GraphError,
    Signature, TailKind,
};
use crate::ramification::{evaluate_tower, ConductorReport, FieldTower, RamificationError, TowerStep};
use crate::rat::{self, fmt_q, q, qi, RatVal, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetacyclicError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("n must be at least 1")]
    ZeroLevel,
    #[error("m must be at least 1")]
    ZeroOrder,
    #[error("Z/{m} cannot act faithfully on Z/{p}^{n}: {reason}")]
    NotFaithful { p: u64, n: u32, m: u64, reason: String },
    #[error("not all a_i may be divisible by m = {0}")]
    AllZero(u64),
    #[error("a_1 + a_2 + a_3 = {sum} is not divisible by m = {m}")]
    SumNotZero { sum: i64, m: u64 },
    #[error("no signature with 0 < σ < 1 at the tame points sums to 1: {0}")]
    NoSolution(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ramification(#[from] RamificationError),
}

type Result<T> = std::result::Result<T, MetacyclicError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetacyclicSpec {
    pub p: u64,
    pub n: u32,
    pub m: u64,
    /// Exponents reduced to `0 ≤ a_i < m`.
    pub a: [u64; 3],
}

fn check_faithful(p: u64, n: u32, m: u64) -> Result<()> {
    if !rat::is_prime(p) {
        return Err(MetacyclicError::NotPrime(p));
    }
    if n == 0 {
        return Err(MetacyclicError::ZeroLevel);
    }
    if m == 0 {
        return Err(MetacyclicError::ZeroOrder);
    }
    let not_faithful = |reason: String| MetacyclicError::NotFaithful { p, n, m, reason };
    let aut = rat::ppow(p, n - 1) * (p - 1);
    if !(&aut % m).is_zero() {
        return Err(not_faithful(format!("m does not divide |Aut(Z/p^n)| = {aut}")));
    }
    // A subgroup of Aut(Z/p^n) of order prime to p; otherwise Z/p^n is not a Sylow subgroup.
    if m.is_multiple_of(p) {
        return Err(not_faithful(format!("p = {p} divides m, so Z/p^n is not a p-Sylow subgroup")));
    }
    Ok(())
}

impl MetacyclicSpec {
    /// Validates and reduces the exponents mod `m`; `m = 1` is the cyclic case.
    pub fn new(p: u64, n: u32, m: u64, a: [i64; 3]) -> Result<Self> {
        check_faithful(p, n, m)?;
        let mi = m as i64;
        let sum: i64 = a.iter().sum();
        if sum.mod_floor(&mi) != 0 {
            return Err(MetacyclicError::SumNotZero { sum, m });
        }
        let red = a.map(|x| x.mod_floor(&mi) as u64);
        if m > 1 && red.iter().all(|&x| x == 0) {
            return Err(MetacyclicError::AllZero(m));
        }
        Ok(MetacyclicSpec { p, n, m, a: red })
    }

    /// `a_i ≡ 0 mod m` marks a wild branch point.
    pub fn is_wild(&self, i: usize) -> bool {
        self.a[i] == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSignature {
    pub h: u64,
    pub m: u64,
    pub sigma: RatVal,
    pub wild: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureSolution {
    pub spec: MetacyclicSpec,
    pub points: [PointSignature; 3],
}

impl SignatureSolution {
    pub fn primitive_sum(&self) -> Q {
        self.points.iter().filter(|x| !x.wild).map(|x| x.sigma.0.clone()).sum()
    }
}

/// Deformation-datum signature at each branch point on the original component.
///
/// `m_i = m / gcd(m, a_i)` and `h_i ≡ a_i / gcd(m, a_i) mod m_i`; a tame point
/// takes the representative with `0 < σ_i < 1`, a wild point has `σ_i = 0`,
/// and the tame `σ_i` must sum to 1.
pub fn signature_solver(spec: &MetacyclicSpec) -> Result<SignatureSolution> {
    let points = [0, 1, 2].map(|i| {
        let a = spec.a[i];
        if spec.is_wild(i) {
            return PointSignature { h: 0, m: 1, sigma: RatVal::int(0), wild: true };
        }
        let g = spec.m.gcd(&a);
        let mi = spec.m / g;
        let h = (a / g) % mi;
        PointSignature { h, m: mi, sigma: RatVal(q(h as i64, mi as i64)), wild: false }
    });
    let sol = SignatureSolution { spec: spec.clone(), points };
    let sum = sol.primitive_sum();
    if sum != qi(1) {
        let flipped = spec.a.map(|x| (spec.m - x) % spec.m);
        return Err(MetacyclicError::NoSolution(format!(
            "the σ_i sum to {}; the exponents are normalized for χ^-1 (try {:?})",
            fmt_q(&sum),
            flipped
        )));
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub p: u64,
    pub n: u32,
    pub m_g: u64,
    /// `"Z/p^n"` when `m_G = 1`, else `"Z/p^n ⋊ Z/m_G"`.
    pub quotient: String,
    pub cyclic: bool,
    /// `m_G = p - 1`: the complement acts through the full prime-to-`p` part of `Aut(Z/p^n)`.
    pub full_normalizer: bool,
}

/// The maximal `Z/p^n ⋊ Z/m_G` quotient of a `p`-solvable group with cyclic `p`-Sylow of order `p^n`.
pub fn psolvable_quotient(p: u64, n: u32, m_g: u64) -> Result<QuotientReport> {
    check_faithful(p, n, m_g)?;
    let quotient = if m_g == 1 { format!("Z/{p}^{n}") } else { format!("Z/{p}^{n} ⋊ Z/{m_g}") };
    Ok(QuotientReport { p, n, m_g, quotient, cyclic: m_g == 1, full_normalizer: m_g == p - 1 })
}

/// The stable reduction of the `Z/p^n ⋊ Z/m`-cover: the original `p^n`-component
/// with one primitive étale tail per tame branch point, at radius
/// `(n + 1/(p-1)) / σ_i`, and the wild points on the original component.
pub fn stable_graph_template(sol: &SignatureSolution) -> Result<DecoratedGraph> {
    let spec = &sol.spec;
    let (p, n) = (spec.p, spec.n);
    let delta0 = qi(n as i64) + q(1, p as i64 - 1);
    let mut components = vec![Component {
        id: 0,
        label: "X0".into(),
        inertia_exponent: n,
        genus: 0,
        kind: ComponentKind::Original,
        tail_kind: TailKind::None,
        etale: false,
        disk: Some(Disk { center: "0".into(), radius_valuation: RatVal::int(0) }),
        specialized_branch_points: Vec::new(),
        sigma: None,
        upstairs: None,
    }];
    let mut edges = Vec::new();
    let mut signatures = Vec::new();
    for (i, pt) in sol.points.iter().enumerate() {
        let label = format!("x_{}", i + 1);
        signatures.push(Signature {
            vertex: 0,
            point: label.clone(),
            h: RatVal::int(pt.h as i64),
            m: pt.m,
            sigma: pt.sigma.clone(),
            logarithmic: true,
        });
        if pt.wild {
            components[0].specialized_branch_points.push(BranchPoint { point: label, index_exponent: n, tame: 1 });
            continue;
        }
        let id = components.len();
        let r = &delta0 / &pt.sigma.0;
        components.push(Component {
            id,
            label: format!("X_{}", i + 1),
            inertia_exponent: 0,
            genus: 0,
            kind: ComponentKind::Tail,
            tail_kind: TailKind::Primitive,
            etale: true,
            disk: Some(Disk { center: label.clone(), radius_valuation: RatVal(r.clone()) }),
            specialized_branch_points: vec![BranchPoint { point: label, index_exponent: 0, tame: pt.m }],
            sigma: Some(pt.sigma.clone()),
            upstairs: None,
        });
        edges.extend(edge_pair(0, id, Some(r)));
    }
    let base = components.len();
    let mut augmented = Vec::new();
    for c in &components {
        for b in &c.specialized_branch_points {
            let id = base + augmented.len();
            augmented.push(Augmented { id, point: b.point.clone(), index_exponent: b.index_exponent });
            edges.extend(edge_pair(c.id, id, None));
        }
    }
    let mut g = DecoratedGraph {
        prime: p,
        n,
        m_g: spec.m,
        cyclic_rules: false,
        lower_confidence: false,
        components,
        augmented,
        edges,
        signatures,
    };
    fill_sigma_eff(&mut g)?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuliNote {
    pub spec: MetacyclicSpec,
    /// `m = 1` belongs to the cyclic analyzer; nothing else is filled in then.
    pub delegated_to_cyclic: bool,
    pub moduli_field: String,
    pub all_tails_primitive: bool,
    pub stable_model_field: String,
    pub tower: Option<FieldTower>,
    pub conductor: Option<ConductorReport>,
    pub vanishes_at_n: bool,
}

/// Field of moduli, tail types and the conductor of the field of the stable model.
pub fn moduli_and_tails_note(spec: &MetacyclicSpec) -> Result<ModuliNote> {
    if spec.m == 1 {
        return Ok(ModuliNote {
            spec: spec.clone(),
            delegated_to_cyclic: true,
            moduli_field: "see the cyclic analysis".into(),
            all_tails_primitive: false,
            stable_model_field: "see the cyclic analysis".into(),
            tower: None,
            conductor: None,
            vanishes_at_n: false,
        });
    }
    let sol = signature_solver(spec)?;
    let g = stable_graph_template(&sol)?;
    let all_tails_primitive = crate::graph::validate(&g).is_empty()
        && g.components
            .iter()
            .filter(|c| g.is_tail(c))
            .all(|c| c.tail_kind == TailKind::Primitive && c.inertia_exponent == 0);
    let tower = FieldTower {
        prime: spec.p,
        n: spec.n,
        steps: vec![TowerStep::Cyclotomic { level: spec.n, conductor: None }, TowerStep::Tame { conductor: None }],
    };
    let report = evaluate_tower(&tower)?;
    Ok(ModuliNote {
        spec: spec.clone(),
        delegated_to_cyclic: false,
        moduli_field: format!("contained in K_{n} = K_0(zeta_{p}^{n})", n = spec.n, p = spec.p),
        all_tails_primitive,
        stable_model_field: format!("a tame extension of K_{}", spec.n),
        vanishes_at_n: report.vanishes_at_n,
        tower: Some(tower),
        conductor: Some(report),
    })
}
