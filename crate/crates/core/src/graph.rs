//! The decorated augmented dual graph of a stable reduction, with
//! validators for the structural rules and the numerical identities
//! (vanishing cycles, local vanishing cycles, effective differents).
//!
//! Undirected edges are stored as two directed edges so that `σ^eff` can be
//! recorded in both directions. Vertices for wild branch points live in
//! `augmented`; their ids share one namespace with the components.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::rat::{self, fmt_q, qi, RatVal, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no unique original component")]
    NoOriginal,
    #[error("graph is not a tree")]
    NotATree,
    #[error("tail {0} has no σ on its inward edge")]
    MissingSigma(usize),
    #[error("edge {0} -> {1} has no σ^eff")]
    MissingSigmaEff(usize, usize),
    #[error("edge {0} -> {1} has no épaisseur")]
    MissingEpaisseur(usize, usize),
    #[error("edge {0} -> {1} does not point outward")]
    EdgeNotOutward(usize, usize),
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("effective different at {0} is negative: {1}")]
    NegativeDifferent(usize, String),
    #[error("effective different at {0} is {1}, expected {2}")]
    InconsistentDifferent(usize, String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Original,
    Interior,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Primitive,
    New,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disk {
    pub center: String,
    pub radius_valuation: RatVal,
}

/// A branch point and its ramification index `p^index_exponent · tame`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub point: String,
    pub index_exponent: u32,
    #[serde(default = "one")]
    pub tame: u64,
}

fn one() -> u64 {
    1
}

/// What lies above a component of `X̄`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Upstairs {
    /// Number of connected components of `Ȳ` above it.
    pub count: String,
    pub genus: u64,
    /// Artin-Schreier conductor at the point meeting the larger-inertia neighbor.
    #[serde(default)]
    pub conductor: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    #[serde(default)]
    pub label: String,
    pub inertia_exponent: u32,
    #[serde(default)]
    pub genus: u64,
    pub kind: ComponentKind,
    pub tail_kind: TailKind,
    pub etale: bool,
    #[serde(default)]
    pub disk: Option<Disk>,
    #[serde(default)]
    pub specialized_branch_points: Vec<BranchPoint>,
    /// `σ_b` for tails.
    #[serde(default)]
    pub sigma: Option<RatVal>,
    #[serde(default)]
    pub upstairs: Option<Upstairs>,
}

/// A vertex of `G' \ G`: a branch point whose index is divisible by `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmented {
    pub id: usize,
    pub point: String,
    pub index_exponent: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: usize,
    pub target: usize,
    #[serde(default)]
    pub epaisseur: Option<RatVal>,
    #[serde(default)]
    pub sigma_eff: Option<RatVal>,
}

/// Deformation-datum invariants `(h, m, σ = h/m)` at a point of a component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub vertex: usize,
    pub point: String,
    pub h: RatVal,
    pub m: u64,
    pub sigma: RatVal,
    #[serde(default)]
    pub logarithmic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoratedGraph {
    pub prime: u64,
    pub n: u32,
    #[serde(rename = "mG")]
    pub m_g: u64,
    /// Enforce the rules that hold for cyclic covers in the guaranteed cases
    /// (no inertia jumps of 2 or more, no contractible components).
    #[serde(default)]
    pub cyclic_rules: bool,
    /// Set when the shape is a template outside the proven cases.
    #[serde(default)]
    pub lower_confidence: bool,
    pub components: Vec<Component>,
    #[serde(default)]
    pub augmented: Vec<Augmented>,
    pub edges: Vec<GraphEdge>,
    #[serde(default)]
    pub signatures: Vec<Signature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    #[serde(default)]
    pub vertex: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn new(code: &str, vertex: Option<usize>, detail: impl Into<String>) -> Self {
        Violation { code: code.to_string(), vertex, detail: detail.into() }
    }
}

/// Rooted view of the graph: parents and children from the original component.
#[derive(Debug, Clone)]
pub struct Rooted {
    pub root: usize,
    pub parent: BTreeMap<usize, usize>,
    pub children: BTreeMap<usize, Vec<usize>>,
    /// Vertices in breadth-first order.
    pub order: Vec<usize>,
}

impl Rooted {
    /// `a ⪯ b`: `a` lies on the path from the root to `b`.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        let mut x = b;
        loop {
            if x == a {
                return true;
            }
            match self.parent.get(&x) {
                Some(&p) => x = p,
                None => return false,
            }
        }
    }

    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            if let Some(ch) = self.children.get(&out[i]) {
                out.extend(ch.iter().copied());
            }
            i += 1;
        }
        out
    }
}

impl DecoratedGraph {
    pub fn component(&self, id: usize) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn augmented_vertex(&self, id: usize) -> Option<&Augmented> {
        self.augmented.iter().find(|a| a.id == id)
    }

    pub fn is_augmented(&self, id: usize) -> bool {
        self.augmented_vertex(id).is_some()
    }

    pub fn vertex_ids(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.id).chain(self.augmented.iter().map(|a| a.id)).collect()
    }

    pub fn edge(&self, s: usize, t: usize) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| e.source == s && e.target == t)
    }

    pub fn edge_mut(&mut self, s: usize, t: usize) -> Option<&mut GraphEdge> {
        self.edges.iter_mut().find(|e| e.source == s && e.target == t)
    }

    /// Distinct neighbors over both edge directions.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.source == v {
                    Some(e.target)
                } else if e.target == v {
                    Some(e.source)
                } else {
                    None
                }
            })
            .collect();
        set.into_iter().collect()
    }

    fn component_neighbors(&self, v: usize) -> Vec<usize> {
        self.neighbors(v).into_iter().filter(|&w| !self.is_augmented(w)).collect()
    }

    pub fn original(&self) -> Result<usize, GraphError> {
        let mut it = self.components.iter().filter(|c| c.kind == ComponentKind::Original);
        match (it.next(), it.next()) {
            (Some(c), None) => Ok(c.id),
            _ => Err(GraphError::NoOriginal),
        }
    }

    /// Breadth-first structure from the original component; fails unless the
    /// underlying undirected graph is a tree.
    pub fn rooted(&self) -> Result<Rooted, GraphError> {
        let root = self.original()?;
        let ids: BTreeSet<usize> = self.vertex_ids().into_iter().collect();
        if ids.len() != self.components.len() + self.augmented.len() {
            return Err(GraphError::NotATree);
        }
        let mut undirected = BTreeSet::new();
        for e in &self.edges {
            if !ids.contains(&e.source) || !ids.contains(&e.target) || e.source == e.target {
                return Err(GraphError::NotATree);
            }
            undirected.insert((e.source.min(e.target), e.source.max(e.target)));
        }
        if undirected.len() + 1 != ids.len() {
            return Err(GraphError::NotATree);
        }
        let mut parent = BTreeMap::new();
        let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut order = vec![root];
        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if seen.insert(w) {
                    parent.insert(w, v);
                    children.entry(v).or_default().push(w);
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        if seen.len() != ids.len() {
            return Err(GraphError::NotATree);
        }
        Ok(Rooted { root, parent, children, order })
    }

    fn inertia(&self, v: usize) -> Option<u32> {
        self.component(v).map(|c| c.inertia_exponent)
    }

    fn is_etale(c: &Component) -> bool {
        c.etale || c.inertia_exponent == 0
    }

    /// Component tails: non-original components meeting exactly one other component.
    pub fn is_tail(&self, c: &Component) -> bool {
        c.kind != ComponentKind::Original && self.component_neighbors(c.id).len() == 1
    }

    fn sigma_of(&self, v: usize) -> Option<Q> {
        self.component(v).and_then(|c| c.sigma.as_ref().map(|s| s.0.clone()))
    }
}

/// Structural rules: tree shape, étale components are tails, tails meet a
/// larger-inertia component, branch points specialize to matching inertia,
/// monotonicity, and (for cyclic covers) no inertia jumps of 2 or more and
/// no contractible components.
pub fn validate_structure(g: &DecoratedGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let r = match g.rooted() {
        Ok(r) => r,
        Err(e) => {
            out.push(Violation::new("not-a-tree", None, e.to_string()));
            return out;
        }
    };
    for c in &g.components {
        let nbrs = g.component_neighbors(c.id);
        let tail = g.is_tail(c);
        if DecoratedGraph::is_etale(c) && !tail {
            out.push(Violation::new(
                "etale-non-tail",
                Some(c.id),
                format!("étale component {} meets {} components", c.label, nbrs.len()),
            ));
        }
        if tail && !DecoratedGraph::is_etale(c) || tail && c.kind == ComponentKind::Tail {
            let nb = nbrs[0];
            if g.inertia(nb).is_some_and(|i| i <= c.inertia_exponent) {
                out.push(Violation::new(
                    "tail-neighbor-not-larger",
                    Some(c.id),
                    format!("tail {} meets a component of no larger inertia", c.label),
                ));
            }
        }
        for b in &c.specialized_branch_points {
            if b.index_exponent != c.inertia_exponent {
                out.push(Violation::new(
                    "branch-specialization",
                    Some(c.id),
                    format!(
                        "branch point {} of index exponent {} lies on a p^{} component",
                        b.point, b.index_exponent, c.inertia_exponent
                    ),
                ));
            }
        }
        if let Some(&p) = r.parent.get(&c.id) {
            if let Some(ip) = g.inertia(p) {
                if c.inertia_exponent > ip {
                    out.push(Violation::new(
                        "non-monotone",
                        Some(c.id),
                        format!("inertia grows outward from {} to {}", ip, c.inertia_exponent),
                    ));
                }
                if g.cyclic_rules && c.inertia_exponent + 2 <= ip {
                    out.push(Violation::new(
                        "inertia-jump>=2",
                        Some(c.id),
                        format!("p^{} component meets a p^{} component", c.inertia_exponent, ip),
                    ));
                }
            }
        }
        if g.cyclic_rules
            && c.kind != ComponentKind::Original
            && c.specialized_branch_points.is_empty()
            && !g.neighbors(c.id).iter().any(|&w| g.is_augmented(w))
            && !nbrs.iter().any(|&w| g.inertia(w).is_some_and(|i| i > c.inertia_exponent))
            && nbrs.len() < 3
        {
            out.push(Violation::new(
                "two-contract",
                Some(c.id),
                format!("{} meets only {} components", c.label, nbrs.len()),
            ));
        }
    }
    for a in &g.augmented {
        match r.parent.get(&a.id).and_then(|&p| g.component(p)) {
            Some(c) if c.inertia_exponent == a.index_exponent => {}
            Some(c) => out.push(Violation::new(
                "branch-specialization",
                Some(a.id),
                format!(
                    "wild branch point {} of index exponent {} lies on a p^{} component",
                    a.point, a.index_exponent, c.inertia_exponent
                ),
            )),
            None => out.push(Violation::new("not-a-tree", Some(a.id), "augmented vertex is not a leaf on a component")),
        }
        if r.children.get(&a.id).is_some_and(|c| !c.is_empty()) {
            out.push(Violation::new("not-a-tree", Some(a.id), "augmented vertex has outward neighbors"));
        }
    }
    out
}

/// `σ^eff(e) = -σ^eff(ē)` on every stored pair, and `σ^eff = 0` on edges to wild branch points.
pub fn edge_invariant_checks(g: &DecoratedGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for e in &g.edges {
        let s = e.sigma_eff.as_ref().map(|x| x.0.clone());
        match (g.edge(e.target, e.source), &s) {
            (None, _) => out.push(Violation::new(
                "sigma-antisymmetry",
                Some(e.source),
                format!("edge {} -> {} has no reverse", e.source, e.target),
            )),
            (Some(rev), Some(s)) => {
                if let Some(rs) = &rev.sigma_eff {
                    if rs.0 != -s.clone() {
                        out.push(Violation::new(
                            "sigma-antisymmetry",
                            Some(e.source),
                            format!("σ^eff({}->{}) = {} but reverse is {}", e.source, e.target, fmt_q(s), rs),
                        ));
                    }
                }
            }
            _ => {}
        }
        if (g.is_augmented(e.source) || g.is_augmented(e.target)) && s.as_ref().is_some_and(|x| *x != qi(0)) {
            out.push(Violation::new(
                "wild-edge-sigma-nonzero",
                Some(e.source),
                format!("edge {} -> {} to a wild branch point has σ^eff ≠ 0", e.source, e.target),
            ));
        }
    }
    out
}

/// `σ_b` of inseparable tails is an integer, new tails have `σ_b ≥ 1 + 1/m`,
/// and graphs with `m_G > 1` have no new or inseparable tails.
pub fn tail_invariant_checks(g: &DecoratedGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let bound = qi(1) + Q::new(1.into(), g.m_g.max(1).into());
    for c in g.components.iter().filter(|c| g.is_tail(c)) {
        let sigma = intrinsic_sigma(g, c);
        let insep = !DecoratedGraph::is_etale(c);
        if insep {
            if let Some(s) = &sigma {
                if !s.is_integer() {
                    out.push(Violation::new(
                        "insep-sigma-nonint",
                        Some(c.id),
                        format!("inseparable tail {} has σ = {}", c.label, fmt_q(s)),
                    ));
                }
            }
        }
        if c.tail_kind == TailKind::New {
            if let Some(s) = &sigma {
                if *s < bound {
                    out.push(Violation::new(
                        "new-tail-sigma-low",
                        Some(c.id),
                        format!("new tail {} has σ = {} < {}", c.label, fmt_q(s), fmt_q(&bound)),
                    ));
                }
            }
        }
        if g.m_g > 1 && (insep || c.tail_kind == TailKind::New) {
            out.push(Violation::new(
                "noinsep-violated",
                Some(c.id),
                format!("m_G = {} but {} is a new or inseparable tail", g.m_g, c.label),
            ));
        }
    }
    out
}

/// Every validator; empty on valid graphs.
pub fn validate(g: &DecoratedGraph) -> Vec<Violation> {
    let mut out = validate_structure(g);
    if out.iter().any(|v| v.code == "not-a-tree") {
        return out;
    }
    out.extend(edge_invariant_checks(g));
    out.extend(tail_invariant_checks(g));
    out
}

/// `σ_b` of an étale tail: the σ^eff of its inward edge, else its stored value.
fn tail_sigma(g: &DecoratedGraph, t: usize) -> Option<Q> {
    let r = g.rooted().ok()?;
    let p = *r.parent.get(&t)?;
    g.edge(p, t).and_then(|e| e.sigma_eff.as_ref().map(|s| s.0.clone())).or_else(|| g.sigma_of(t))
}

/// `σ_b` of any tail. An inseparable tail's invariant is that of the étale
/// tail it becomes in the quotient by its inertia, which differs from the
/// σ^eff of its inward edge, so the stored value wins there.
fn intrinsic_sigma(g: &DecoratedGraph, c: &Component) -> Option<Q> {
    if DecoratedGraph::is_etale(c) {
        tail_sigma(g, c.id)
    } else {
        g.sigma_of(c.id)
    }
}

/// Residual of the vanishing cycles formula: `Σ_new (σ_b - 1) + Σ_prim σ_b - 1`
/// over étale tails.
pub fn check_vanishing_cycles(g: &DecoratedGraph) -> Result<Q, GraphError> {
    let mut acc = qi(-1);
    for c in g.components.iter().filter(|c| g.is_tail(c) && DecoratedGraph::is_etale(c)) {
        let s = tail_sigma(g, c.id).ok_or(GraphError::MissingSigma(c.id))?;
        match c.tail_kind {
            TailKind::Primitive => acc += s,
            _ => acc += s - qi(1),
        }
    }
    Ok(acc)
}

/// Residual `Σ_{s(e)=v} (σ^eff_e - 1) - (2 g_v - 2)` at each inseparable component.
pub fn check_local_vanishing(g: &DecoratedGraph) -> Result<Vec<(usize, Q)>, GraphError> {
    let mut out = Vec::new();
    for c in g.components.iter().filter(|c| !DecoratedGraph::is_etale(c)) {
        let mut acc = qi(0);
        for e in g.edges.iter().filter(|e| e.source == c.id) {
            let s = e.sigma_eff.as_ref().ok_or(GraphError::MissingSigmaEff(e.source, e.target))?;
            acc += &s.0 - qi(1);
        }
        out.push((c.id, acc - qi(2 * c.genus as i64 - 2)));
    }
    Ok(out)
}

/// `σ^eff_e = 1 + Σ_{b ∈ B_e} (σ_b - 1) - |Π_e|` for `s(e) ≺ t(e)`, from the
/// étale tails and wild branch points at or beyond `t(e)`; tame branch points do not count.
pub fn sigma_eff_outward(g: &DecoratedGraph, s: usize, t: usize) -> Result<Q, GraphError> {
    let r = g.rooted()?;
    if r.parent.get(&t) != Some(&s) {
        return Err(GraphError::EdgeNotOutward(s, t));
    }
    if g.is_augmented(t) || g.is_augmented(s) {
        return Ok(qi(0));
    }
    let mut acc = qi(1);
    for v in r.subtree(t) {
        if let Some(a) = g.augmented_vertex(v) {
            if a.index_exponent > 0 {
                acc -= qi(1);
            }
        } else if let Some(c) = g.component(v) {
            if DecoratedGraph::is_etale(c) && g.is_tail(c) {
                let sb = g.sigma_of(v).ok_or(GraphError::MissingSigma(v))?;
                acc += sb - qi(1);
            }
        }
    }
    Ok(acc)
}

/// Fills `σ^eff` on every stored edge pair from the tails' `σ_b`.
pub fn fill_sigma_eff(g: &mut DecoratedGraph) -> Result<(), GraphError> {
    let r = g.rooted()?;
    let pairs: Vec<(usize, usize)> = r.parent.iter().map(|(&c, &p)| (p, c)).collect();
    for (p, c) in pairs {
        let s = sigma_eff_outward(g, p, c)?;
        if let Some(e) = g.edge_mut(p, c) {
            e.sigma_eff = Some(RatVal(s.clone()));
        }
        if let Some(e) = g.edge_mut(c, p) {
            e.sigma_eff = Some(RatVal(-s));
        }
    }
    Ok(())
}

/// `δ^eff` on every component, telescoped outward from
/// `δ^eff(X̄_0) = (r - 1) + p/(p-1)` by `δ^eff_W - δ^eff_{W'} = σ^eff_e ε_e`.
/// Étale tails must land exactly on 0 and every other component stays positive.
pub fn effective_different_profile(g: &DecoratedGraph) -> Result<BTreeMap<usize, Q>, GraphError> {
    let r = g.rooted()?;
    let p = g.prime as i64;
    let root = g.component(r.root).ok_or(GraphError::NoOriginal)?;
    let mut out = BTreeMap::new();
    out.insert(r.root, qi(root.inertia_exponent as i64 - 1) + Q::new(p.into(), (p - 1).into()));
    for &v in &r.order[1..] {
        if g.is_augmented(v) {
            continue;
        }
        let par = r.parent[&v];
        let e = g.edge(par, v).ok_or(GraphError::MissingSigmaEff(par, v))?;
        let s = e.sigma_eff.as_ref().ok_or(GraphError::MissingSigmaEff(par, v))?;
        let eps = e.epaisseur.as_ref().ok_or(GraphError::MissingEpaisseur(par, v))?;
        let d = &out[&par] - &s.0 * &eps.0;
        let c = g.component(v).ok_or(GraphError::UnknownVertex(v))?;
        if d < qi(0) {
            return Err(GraphError::NegativeDifferent(v, fmt_q(&d)));
        }
        let etale_tail = DecoratedGraph::is_etale(c) && g.is_tail(c);
        if etale_tail != (d == qi(0)) {
            return Err(GraphError::InconsistentDifferent(
                v,
                fmt_q(&d),
                if etale_tail { "0".into() } else { "positive".into() },
            ));
        }
        out.insert(v, d);
    }
    Ok(out)
}

/// `(tail, Σ σ^eff ε)` along the path from the original component to each étale tail.
pub fn telescoping_sums(g: &DecoratedGraph) -> Result<Vec<(usize, Q)>, GraphError> {
    let r = g.rooted()?;
    let mut out = Vec::new();
    for c in g.components.iter().filter(|c| DecoratedGraph::is_etale(c) && g.is_tail(c)) {
        let mut acc = qi(0);
        let mut v = c.id;
        while let Some(&par) = r.parent.get(&v) {
            let e = g.edge(par, v).ok_or(GraphError::MissingSigmaEff(par, v))?;
            let s = e.sigma_eff.as_ref().ok_or(GraphError::MissingSigmaEff(par, v))?;
            let eps = e.epaisseur.as_ref().ok_or(GraphError::MissingEpaisseur(par, v))?;
            acc += &s.0 * &eps.0;
            v = par;
        }
        out.push((c.id, acc));
    }
    Ok(out)
}

/// Épaisseur of each stored edge between components agrees with the radii of the disks.
pub fn radius_checks(g: &DecoratedGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for e in &g.edges {
        let (Some(a), Some(b)) = (g.component(e.source), g.component(e.target)) else {
            continue;
        };
        let (Some(da), Some(db), Some(eps)) = (&a.disk, &b.disk, &e.epaisseur) else {
            continue;
        };
        let diff = (&db.radius_valuation.0 - &da.radius_valuation.0).abs();
        if eps.0 <= qi(0) || diff != eps.0 {
            out.push(Violation::new(
                "epaisseur-mismatch",
                Some(e.source),
                format!("edge {} -> {}: épaisseur {} but radii differ by {}", e.source, e.target, eps, fmt_q(&diff)),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
}

pub fn export_graph(g: &DecoratedGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => serde_json::to_string_pretty(g).expect("graph serializes"),
        ExportFormat::Dot => to_dot(g),
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn to_dot(g: &DecoratedGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph stable_reduction {{");
    let _ = writeln!(s, "  node [shape=box];");
    for c in &g.components {
        let radius = c.disk.as_ref().map(|d| format!("\\nv(r)={}", d.radius_valuation)).unwrap_or_default();
        let _ = writeln!(s, "  v{} [label=\"{}\\np^{}{}\"];", c.id, dot_escape(&c.label), c.inertia_exponent, radius);
    }
    for a in &g.augmented {
        let _ = writeln!(s, "  v{} [shape=circle, label=\"{}\"];", a.id, dot_escape(&a.point));
    }
    let r = g.rooted().ok();
    for e in &g.edges {
        // One line per undirected edge, labelled with the outward direction.
        let outward = match &r {
            Some(r) => r.parent.get(&e.target) == Some(&e.source),
            None => e.source < e.target,
        };
        if !outward {
            continue;
        }
        let mut label = Vec::new();
        if let Some(x) = &e.epaisseur {
            label.push(format!("ε={x}"));
        }
        if let Some(x) = &e.sigma_eff {
            label.push(format!("σ={x}"));
        }
        let _ = writeln!(s, "  v{} -- v{} [label=\"{}\"];", e.source, e.target, label.join(", "));
    }
    let _ = writeln!(s, "}}");
    s
}

/// Builds both directed copies of an edge.
pub fn edge_pair(a: usize, b: usize, epaisseur: Option<Q>) -> [GraphEdge; 2] {
    let eps = epaisseur.map(RatVal);
    [
        GraphEdge { source: a, target: b, epaisseur: eps.clone(), sigma_eff: None },
        GraphEdge { source: b, target: a, epaisseur: eps, sigma_eff: None },
    ]
}

/// Σ over a path, exposed for the acceptance checks on paths to étale tails.
pub fn different_at_original(g: &DecoratedGraph) -> Option<Q> {
    let c = g.component(g.original().ok()?)?;
    Some(qi(c.inertia_exponent as i64 - 1) + rat::q(g.prime as i64, g.prime as i64 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(id: usize, i: u32, kind: ComponentKind, tk: TailKind, r: Q) -> Component {
        Component {
            id,
            label: format!("W{id}"),
            inertia_exponent: i,
            genus: 0,
            kind,
            tail_kind: tk,
            etale: i == 0,
            disk: Some(Disk { center: "d".into(), radius_valuation: RatVal(r) }),
            specialized_branch_points: Vec::new(),
            sigma: None,
            upstairs: None,
        }
    }

    /// The neighbourhood of `X̄_*` in the partial-branch graph for p = 5, n = 2, s = 1.
    fn partial_branch_star() -> DecoratedGraph {
        use ComponentKind::*;
        let p = 5;
        let pq = rat::q(1, p - 1);
        let mut c0 = comp(0, 2, Original, TailKind::None, qi(0));
        c0.specialized_branch_points = vec![];
        let star = comp(1, 2, Interior, TailKind::None, qi(1));
        let mut dagger = comp(2, 1, Tail, TailKind::None, qi(1) + &pq);
        dagger.disk.as_mut().unwrap().center = "1".into();
        let x1 = comp(3, 1, Interior, TailKind::None, qi(1) + &pq);
        let mut tail = comp(4, 0, Tail, TailKind::New, (qi(3) + &pq) / qi(2));
        tail.sigma = Some(RatVal(qi(2)));
        let aug = |id, pt: &str, i| Augmented { id, point: pt.into(), index_exponent: i };
        let mut edges = Vec::new();
        edges.extend(edge_pair(0, 1, Some(qi(1))));
        edges.extend(edge_pair(1, 2, Some(pq.clone())));
        edges.extend(edge_pair(1, 3, Some(pq.clone())));
        edges.extend(edge_pair(3, 4, Some((qi(3) + &pq) / qi(2) - qi(1) - &pq)));
        edges.extend(edge_pair(0, 5, None));
        edges.extend(edge_pair(0, 6, None));
        edges.extend(edge_pair(2, 7, None));
        let mut g = DecoratedGraph {
            prime: p as u64,
            n: 2,
            m_g: 1,
            cyclic_rules: true,
            lower_confidence: false,
            components: vec![c0, star, dagger, x1, tail],
            augmented: vec![aug(5, "0", 2), aug(6, "inf", 2), aug(7, "1", 1)],
            edges,
            signatures: Vec::new(),
        };
        fill_sigma_eff(&mut g).unwrap();
        g
    }

    #[test]
    fn partial_branch_star_identities() {
        let g = partial_branch_star();
        assert_eq!(validate(&g), vec![]);
        assert_eq!(check_vanishing_cycles(&g).unwrap(), qi(0));
        assert!(check_local_vanishing(&g).unwrap().iter().all(|(_, r)| *r == qi(0)));
        assert_eq!(g.edge(1, 3).unwrap().sigma_eff, Some(RatVal(qi(2))));
        assert_eq!(g.edge(1, 2).unwrap().sigma_eff, Some(RatVal(qi(0))));
        assert_eq!(g.edge(0, 1).unwrap().sigma_eff, Some(RatVal(qi(1))));
        let d = effective_different_profile(&g).unwrap();
        assert_eq!(d[&1], qi(1) + rat::q(1, 4));
        assert_eq!(d[&4], qi(0));
        assert!(radius_checks(&g).is_empty());
    }

    #[test]
    fn isolated_original_component() {
        let g = DecoratedGraph {
            prime: 5,
            n: 1,
            m_g: 1,
            cyclic_rules: true,
            lower_confidence: false,
            components: vec![comp(0, 1, ComponentKind::Original, TailKind::None, qi(0))],
            augmented: vec![],
            edges: vec![],
            signatures: vec![],
        };
        assert_eq!(check_local_vanishing(&g).unwrap(), vec![(0, qi(2))]);
    }

    #[test]
    fn sigma_eff_formula_cases() {
        let g = partial_branch_star();
        assert_eq!(sigma_eff_outward(&g, 1, 3).unwrap(), qi(2));
        assert_eq!(sigma_eff_outward(&g, 1, 2).unwrap(), qi(0));
        assert_eq!(sigma_eff_outward(&g, 0, 1).unwrap(), qi(1));
        assert!(matches!(sigma_eff_outward(&g, 3, 1), Err(GraphError::EdgeNotOutward(3, 1))));
    }

    #[test]
    fn dot_lists_every_vertex() {
        let g = partial_branch_star();
        let dot = export_graph(&g, ExportFormat::Dot);
        assert!(dot.starts_with("graph "));
        assert_eq!(dot.matches(" -- ").count(), 7);
        let back: DecoratedGraph = serde_json::from_str(&export_graph(&g, ExportFormat::Json)).unwrap();
        assert_eq!(back, g);
    }
}
