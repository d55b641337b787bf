//! The stable reduction tree of a three-point cyclic cover.
//!
//! Generic inertia over a disk `D(c, r)` is `p^k` for the least `k` such
//! that `Y/Q_k` is étale over it. For `k < s` that quotient is again a
//! three-point cover whose étale locus is its new-tail disk; for `k ≥ s` it
//! is the Kummer cover `y^{p^{n-k}} = x^a`, étale once `r ≥ n - k + 1/(p-1)`.
//! Components sit at the root, at tails, at branchings of the tree spanned
//! by the tail disks, and where the inertia drops along a path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::locus::{center_label, certify_one_disk, certify_tail, new_tail_radius, CenterField, LocusDesc};
use super::{CoverError, CoverSpec};
use crate::config::RunConfig;
use crate::graph::{
    edge_pair, fill_sigma_eff, Augmented, BranchPoint, Component, ComponentKind, DecoratedGraph, Disk, TailKind,
    Upstairs,
};
use crate::rat::{self, q, qi, RatVal, Q};
use crate::series::{ReductionVerdict, VerdictKind};
use crate::tower::Elem;

/// What a certificate is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailRole {
    /// The new-tail disk of `Y/Q_k`; `k = 0` is the étale tail of the cover itself.
    QuotientNewTail { level: u32 },
    /// The disk carrying `x = 1`, where `Y/Q_s` is étale.
    BranchPointOne { level: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub component: usize,
    pub role: TailRole,
    pub locus: LocusDesc,
    pub verdict: ReductionVerdict,
}

#[derive(Debug, Clone)]
struct Marked {
    center: Elem,
    radius: Q,
    label: String,
    /// `None` for a disk that only shapes the tree and carries no certificate.
    role: Option<TailRole>,
    /// Inertia exponent inside the disk, for disks where a quotient becomes étale.
    level: Option<u32>,
}

#[derive(Debug, Clone)]
struct Node {
    center: Elem,
    label: String,
    radius: Q,
    parent: Option<usize>,
}

/// `θ_k = n - k + 1/(p-1)`: from this radius on, `y^{p^{n-k}} = x^a` is étale.
fn kummer_threshold(spec: &CoverSpec, k: u32) -> Q {
    qi(spec.n as i64 - k as i64) + q(1, spec.p as i64 - 1)
}

/// `v(x - y)`, `None` for equal elements.
fn dist(x: &Elem, y: &Elem) -> Option<Q> {
    (x - y).val()
}

fn within(x: &Elem, y: &Elem, r: &Q) -> bool {
    dist(x, y).is_none_or(|v| v >= *r)
}

struct Skeleton<'a> {
    spec: &'a CoverSpec,
    /// `(k, c, r)`: `Y/Q_k` is étale over `D(c, r)`.
    tails: Vec<(u32, Elem, Q)>,
}

impl Skeleton<'_> {
    /// Inertia exponent over `D(c, r)`; with `open` set, over disks of radius just below `r`.
    fn inertia(&self, c: &Elem, r: &Q, open: bool) -> u32 {
        let reaches = |r0: &Q| if open { r > r0 } else { r >= r0 };
        let etale = self.tails.iter().filter(|(_, ck, rk)| reaches(rk) && within(c, ck, rk)).map(|(k, _, _)| *k).min();
        if let Some(k) = etale {
            return k;
        }
        for k in self.spec.s..self.spec.n {
            if reaches(&kummer_threshold(self.spec, k)) {
                return k;
            }
        }
        self.spec.n
    }
}

/// Whether the guaranteed-shape results cover this spec.
pub fn lower_confidence(spec: &CoverSpec) -> bool {
    spec.p == 2 || (spec.p == 3 && spec.s > 1 && spec.s < spec.n)
}

/// `σ_b` read off a certificate: the Artin-Schreier conductor, or 2 for the `μ_4` case.
fn certified_sigma(v: &ReductionVerdict) -> Result<Q, CoverError> {
    match &v.kind {
        VerdictKind::SplitsArtinSchreier { conductor, .. } => Ok(qi(*conductor as i64)),
        VerdictKind::SplitsZ4 { .. } => Ok(qi(2)),
        VerdictKind::NotCertified { reason } => Err(CoverError::CertificationFailed(reason.clone())),
    }
}

/// The decorated stable graph and the certificates of its tails.
pub fn build_stable_graph(
    spec: &CoverSpec,
    cfg: &RunConfig,
) -> Result<(DecoratedGraph, Vec<TailCertificate>), CoverError> {
    let p = spec.p;
    let (n, s) = (spec.n, spec.s);
    let ks: Vec<u32> = (0..s).collect();
    let field = CenterField::new(spec, &ks, false)?;
    let t = field.tower.clone();

    let mut marked = Vec::new();
    if s < n {
        marked.push(Marked {
            center: Elem::one(&t),
            radius: kummer_threshold(spec, s),
            label: "1".into(),
            role: Some(TailRole::BranchPointOne { level: s }),
            level: None,
        });
    }
    for k in 0..s {
        marked.push(Marked {
            center: field.center(spec, k)?,
            radius: new_tail_radius(p, n - k, s - k),
            label: center_label(spec, k),
            role: Some(TailRole::QuotientNewTail { level: k }),
            level: Some(k),
        });
    }
    if p == 3 && 1 < s && s < n {
        // The level-(s-1) new tail sits at d', off the chain of the other
        // levels at d = a/(a+b); the chain keeps its p^{s-1}-component.
        let ab = &spec.a + &spec.b;
        marked.push(Marked {
            center: Elem::from_q(&t, Q::new(spec.a.clone(), ab)),
            radius: new_tail_radius(p, n - s + 1, 1),
            label: center_label(spec, 0),
            role: None,
            level: Some(s - 1),
        });
    }
    let sk = Skeleton {
        spec,
        tails: marked.iter().filter_map(|m| m.level.map(|k| (k, m.center.clone(), m.radius.clone()))).collect(),
    };

    // The tree spanned by the marked disks, with every candidate radius as a node.
    let thresholds: Vec<Q> = (s..n).map(|k| kummer_threshold(spec, k)).collect();
    let mut nodes: Vec<Node> = vec![Node { center: Elem::zero(&t), label: "0".into(), radius: qi(0), parent: None }];
    let mut leaf_of: Vec<usize> = Vec::new();
    for m in &marked {
        let mut radii: Vec<Q> = vec![m.radius.clone()];
        radii.extend(thresholds.iter().filter(|x| **x < m.radius).cloned());
        for o in &marked {
            let d = dist(&m.center, &o.center);
            if within(&m.center, &o.center, &o.radius) && o.radius < m.radius {
                radii.push(o.radius.clone());
            }
            if let Some(d) = d {
                if d < m.radius && d < o.radius && d > qi(0) {
                    radii.push(d);
                }
            }
        }
        radii.retain(|r| *r > qi(0));
        radii.sort();
        radii.dedup();
        let mut prev = 0usize;
        for r in radii {
            let found = nodes.iter().position(|x| x.radius == r && within(&x.center, &m.center, &r));
            prev = match found {
                Some(i) => i,
                None => {
                    nodes.push(Node {
                        center: m.center.clone(),
                        label: m.label.clone(),
                        radius: r,
                        parent: Some(prev),
                    });
                    nodes.len() - 1
                }
            };
        }
        leaf_of.push(prev);
    }

    let mut children: BTreeMap<usize, usize> = BTreeMap::new();
    for x in &nodes {
        if let Some(par) = x.parent {
            *children.entry(par).or_default() += 1;
        }
    }
    let inertia: Vec<u32> = nodes.iter().map(|x| sk.inertia(&x.center, &x.radius, false)).collect();
    let keep: Vec<bool> = nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            i == 0 || children.get(&i).copied().unwrap_or(0) != 1 || inertia[i] < sk.inertia(&x.center, &x.radius, true)
        })
        .collect();

    // Collapse to kept nodes; ids are assigned in creation order, which is outward.
    let mut id_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, k) in keep.iter().enumerate() {
        if *k {
            let id = id_of.len();
            id_of.insert(i, id);
        }
    }
    let kept_parent = |mut i: usize| -> Option<usize> {
        loop {
            i = nodes[i].parent?;
            if keep[i] {
                return Some(i);
            }
        }
    };

    let low = lower_confidence(spec);
    let mut comps: Vec<Component> = Vec::new();
    let mut edges = Vec::new();
    let mut parent_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (&i, &id) in &id_of {
        let x = &nodes[i];
        let is_leaf = children.get(&i).copied().unwrap_or(0) == 0;
        let kind = if i == 0 {
            ComponentKind::Original
        } else if is_leaf {
            ComponentKind::Tail
        } else {
            ComponentKind::Interior
        };
        let mut tail_kind = TailKind::None;
        let mut label = if i == 0 { "X0".to_string() } else { format!("W{id}") };
        let mut bps = Vec::new();
        if let Some(mi) = leaf_of.iter().position(|&l| l == i) {
            match &marked[mi].role {
                Some(TailRole::BranchPointOne { .. }) => {
                    tail_kind = TailKind::Primitive;
                    label = "X_dagger".into();
                }
                Some(TailRole::QuotientNewTail { level }) => {
                    tail_kind = TailKind::New;
                    label = if *level == 0 { "X_new".into() } else { format!("X_new_{level}") };
                }
                None => {}
            }
        }
        if i == 0 {
            bps.push(BranchPoint { point: "0".into(), index_exponent: n, tame: 1 });
            bps.push(BranchPoint { point: "inf".into(), index_exponent: n, tame: 1 });
            if s == n {
                bps.push(BranchPoint { point: "1".into(), index_exponent: n, tame: 1 });
            }
        }
        if matches!(tail_kind, TailKind::Primitive) {
            bps.push(BranchPoint { point: "1".into(), index_exponent: s, tame: 1 });
        }
        comps.push(Component {
            id,
            label,
            inertia_exponent: inertia[i],
            genus: 0,
            kind,
            tail_kind,
            etale: inertia[i] == 0,
            disk: Some(Disk { center: x.label.clone(), radius_valuation: RatVal(x.radius.clone()) }),
            specialized_branch_points: bps,
            sigma: None,
            upstairs: None,
        });
        if let Some(pi) = kept_parent(i) {
            let pid = id_of[&pi];
            parent_of.insert(id, pid);
            edges.extend(edge_pair(pid, id, Some(&x.radius - &nodes[pi].radius)));
        }
    }
    // X̄_*: where the path to x = 1 leaves the others.
    if s < n {
        let star = comps.iter().find(|c| c.label == "X_dagger").and_then(|c| parent_of.get(&c.id).copied());
        if let Some(st) = star {
            if comps[st].kind == ComponentKind::Interior {
                comps[st].label = "X_star".into();
            }
        }
    }

    // Certificates and σ_b of the tails.
    let mut certs = Vec::new();
    for (mi, m) in marked.iter().enumerate() {
        let id = id_of[&leaf_of[mi]];
        let Some(role) = &m.role else { continue };
        let (verdict, locus) = match role {
            TailRole::QuotientNewTail { level } => {
                let qs = if *level == 0 { spec.clone() } else { spec.quotient(*level)? };
                (certify_tail(&qs, cfg)?, locus_desc(&m.center, &m.label, &m.radius))
            }
            TailRole::BranchPointOne { .. } => {
                let v = certify_one_disk(spec, cfg)?;
                (v, locus_desc(&m.center, &m.label, &m.radius))
            }
        };
        comps[id].sigma = Some(RatVal(certified_sigma(&verdict)?));
        certs.push(TailCertificate { component: id, role: role.clone(), locus, verdict });
    }

    let base = comps.len();
    let mut augmented = Vec::new();
    for c in &comps {
        for b in &c.specialized_branch_points {
            let id = base + augmented.len();
            augmented.push(Augmented { id, point: b.point.clone(), index_exponent: b.index_exponent });
            edges.extend(edge_pair(c.id, id, None));
        }
    }

    let mut g = DecoratedGraph {
        prime: p,
        n,
        m_g: 1,
        // The no-jumps-of-two argument needs p > 2.
        cyclic_rules: p != 2,
        lower_confidence: low,
        components: comps,
        augmented,
        edges,
        signatures: Vec::new(),
    };
    fill_sigma_eff(&mut g)?;
    if !low {
        decorate_upstairs(&mut g, spec, &parent_of);
    }
    add_wild_signatures(&mut g);
    Ok((g, certs))
}

fn locus_desc(c: &Elem, label: &str, r: &Q) -> LocusDesc {
    LocusDesc {
        center: label.to_string(),
        center_tower: c.tower.describe(),
        center_coords: c.c.clone(),
        radius_valuation: RatVal(r.clone()),
    }
}

/// Components of `Ȳ` above each component, their genus and conductor.
fn decorate_upstairs(g: &mut DecoratedGraph, spec: &CoverSpec, parent_of: &BTreeMap<usize, usize>) {
    let p = spec.p;
    let inertia: BTreeMap<usize, u32> = g.components.iter().map(|c| (c.id, c.inertia_exponent)).collect();
    for c in g.components.iter_mut() {
        let i = c.inertia_exponent;
        let borders_larger = parent_of.get(&c.id).is_some_and(|par| inertia[par] == i + 1);
        c.upstairs = Some(if borders_larger {
            let h: u64 = if spec.s < spec.n && i >= spec.s { 1 } else { 2 };
            Upstairs {
                count: rat::ppow(p, spec.n - i - 1).to_string(),
                genus: (h - 1) * (p - 1) / 2,
                conductor: Some(h),
            }
        } else {
            Upstairs { count: rat::ppow(p, spec.n - i).to_string(), genus: 0, conductor: None }
        });
    }
}

/// `σ = 0` with a logarithmic form at every wild branch point.
fn add_wild_signatures(g: &mut DecoratedGraph) {
    let mut sigs = Vec::new();
    for c in &g.components {
        for b in &c.specialized_branch_points {
            if b.index_exponent > 0 {
                sigs.push(crate::graph::Signature {
                    vertex: c.id,
                    point: b.point.clone(),
                    h: RatVal::int(0),
                    m: 1,
                    sigma: RatVal::int(0),
                    logarithmic: true,
                });
            }
        }
    }
    g.signatures = sigs;
}

/// An inseparable tail: inertia exponent, disk, and the radius where it leaves the rest of the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InseparableTail {
    pub component: usize,
    pub inertia_exponent: u32,
    pub center: String,
    pub radius_valuation: RatVal,
    pub separation_valuation: RatVal,
    pub contains_one: bool,
}

/// Inseparable tails of the stable reduction (empty when `s = n`).
pub fn inseparable_tails(spec: &CoverSpec, cfg: &RunConfig) -> Result<Vec<InseparableTail>, CoverError> {
    let (g, _) = build_stable_graph(spec, cfg)?;
    super::report::inseparable_tails_of(&g)
}

/// Radius of the new tail of `Y/Q_j`, from the quotient's own data.
pub fn quotient_tail_radius(spec: &CoverSpec, j: u32) -> Result<Q, CoverError> {
    let qs = spec.quotient(j)?;
    Ok(new_tail_radius(qs.p, qs.n, qs.s))
}
