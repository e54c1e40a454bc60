//! The core engine: finest closed equivalence relation respecting a collapse
//! family, the FS and componentwise relations, the quotient pseudo-metric,
//! finitely-Suslinian-at-scale checks and refinement comparison.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{declared_limits, LimitKind};
use crate::cdl::LimitClause;
use crate::geometry::{
    common_denominator, is_connected, rect_covered_by, set_distance, PieceGeometry, Rect, Scalar,
};
use crate::truncation::{AtomId, TruncatedCompactum};

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("collapse element {label} is not covered by atoms of the truncation")]
    NonCoveredCollapse { label: String },
    #[error("partitions live on different atom universes")]
    UniverseMismatch,
    #[error("invalid partition data: {0}")]
    InvalidPartition(String),
}

/// A continuum to be collapsed to a point by the closure engine.
#[derive(Debug, Clone)]
pub struct CollapseElement {
    pub label: String,
    pub geometry: PieceGeometry,
}

#[derive(Debug, Clone, Serialize)]
pub enum MergeRule {
    /// Atoms of one collapse element join.
    CollapseElement { label: String },
    /// Two intersecting collapse elements chain into one class.
    ElementChain { a: String, b: String },
    /// Tail-stabilized family limit closure; `heuristic` marks merges that
    /// relied on a nonempty stabilized augmentation.
    LimitRule { family: String, heuristic: bool },
    /// Classes supplied externally (imports, manual constructions).
    External,
}

#[derive(Debug, Clone, Serialize)]
pub struct MergeRecord {
    pub from: AtomId,
    pub into: AtomId,
    pub rule: MergeRule,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub merges: Vec<MergeRecord>,
}

/// Ordered fixpoint rounds; the finite-scale shadow of the ordinal index of
/// the transfinite construction.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ClosureTrace {
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub atoms: Vec<AtomId>,
    pub geometry: PieceGeometry,
}

/// An equivalence relation on the atoms of one truncation. Class
/// representatives are the smallest atom ids, making equal partitions
/// structurally identical.
#[derive(Debug, Clone)]
pub struct Partition {
    rep_of: Vec<AtomId>,
    classes: BTreeMap<AtomId, ClassInfo>,
    pub trace: ClosureTrace,
}

impl Partition {
    pub fn n_atoms(&self) -> usize {
        self.rep_of.len()
    }

    pub fn rep(&self, a: AtomId) -> AtomId {
        self.rep_of[a as usize]
    }

    pub fn same_class(&self, a: AtomId, b: AtomId) -> bool {
        self.rep(a) == self.rep(b)
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> impl Iterator<Item = (AtomId, &ClassInfo)> {
        self.classes.iter().map(|(r, c)| (*r, c))
    }

    pub fn class(&self, rep: AtomId) -> &ClassInfo {
        &self.classes[&rep]
    }

    /// Classes with at least two atoms: the collapsed continua of the
    /// quotient, as opposed to scale-δ singletons.
    pub fn merged_classes(&self) -> impl Iterator<Item = (AtomId, &ClassInfo)> {
        self.classes().filter(|(_, c)| c.atoms.len() >= 2)
    }

    pub fn is_identity(&self) -> bool {
        self.classes.values().all(|c| c.atoms.len() == 1)
    }

    pub fn same_partition(&self, other: &Partition) -> bool {
        self.rep_of == other.rep_of
    }

    fn from_uf(t: &TruncatedCompactum, uf: &mut UnionFind, trace: ClosureTrace) -> Partition {
        let n = t.atoms.len();
        let mut min_of_root: BTreeMap<u32, AtomId> = BTreeMap::new();
        for a in 0..n as u32 {
            let r = uf.find(a);
            let entry = min_of_root.entry(r).or_insert(a);
            if a < *entry {
                *entry = a;
            }
        }
        let mut rep_of = vec![0u32; n];
        let mut groups: BTreeMap<AtomId, Vec<AtomId>> = BTreeMap::new();
        for a in 0..n as u32 {
            let rep = min_of_root[&uf.find(a)];
            rep_of[a as usize] = rep;
            groups.entry(rep).or_default().push(a);
        }
        let classes = groups
            .into_iter()
            .map(|(rep, atoms)| {
                let geometry = PieceGeometry::from_parts_unchecked(
                    atoms.iter().map(|&a| t.atom(a).rect.clone()).collect(),
                );
                (rep, ClassInfo { atoms, geometry })
            })
            .collect();
        Partition { rep_of, classes, trace }
    }

    /// Identity partition: every atom its own class.
    pub fn identity(t: &TruncatedCompactum) -> Partition {
        let mut uf = UnionFind::new(t.atoms.len());
        Partition::from_uf(t, &mut uf, ClosureTrace::default())
    }

    /// Partition from explicit groups; unlisted atoms stay singletons.
    pub fn from_groups(t: &TruncatedCompactum, groups: &[Vec<AtomId>]) -> Partition {
        let mut uf = UnionFind::new(t.atoms.len());
        let mut merges = Vec::new();
        for g in groups {
            for w in g.windows(2) {
                if uf.union(w[0], w[1]) {
                    merges.push(MergeRecord {
                        from: w[1],
                        into: w[0],
                        rule: MergeRule::External,
                    });
                }
            }
        }
        let trace = ClosureTrace {
            rounds: vec![RoundRecord { round: 0, merges }],
        };
        Partition::from_uf(t, &mut uf, trace)
    }

    /// JSON export: atom id -> class representative plus the closure trace.
    pub fn to_json(&self) -> serde_json::Value {
        let atoms: BTreeMap<String, AtomId> = self
            .rep_of
            .iter()
            .enumerate()
            .map(|(a, r)| (format!("{a:06}"), *r))
            .collect();
        serde_json::json!({
            "atoms": atoms,
            "trace": serde_json::to_value(&self.trace).expect("trace serializes"),
        })
    }

    /// Import from the JSON produced by [`Partition::to_json`]; only the
    /// atom-to-class map is honored, class structure is recomputed.
    pub fn from_json(
        t: &TruncatedCompactum,
        value: &serde_json::Value,
    ) -> Result<Partition, RelationError> {
        let atoms = value
            .get("atoms")
            .and_then(|v| v.as_object())
            .ok_or_else(|| RelationError::InvalidPartition("missing atoms map".into()))?;
        if atoms.len() != t.atoms.len() {
            return Err(RelationError::UniverseMismatch);
        }
        let mut groups: BTreeMap<u64, Vec<AtomId>> = BTreeMap::new();
        for (key, val) in atoms {
            let a: u64 = key
                .parse()
                .map_err(|_| RelationError::InvalidPartition(format!("bad atom id {key:?}")))?;
            if a as usize >= t.atoms.len() {
                return Err(RelationError::UniverseMismatch);
            }
            let class = val
                .as_u64()
                .ok_or_else(|| RelationError::InvalidPartition("class id must be integral".into()))?;
            groups.entry(class).or_default().push(a as AtomId);
        }
        let groups: Vec<Vec<AtomId>> = groups.into_values().collect();
        Ok(Partition::from_groups(t, &groups))
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, a: u32) -> u32 {
        let mut root = a;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = a;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Closure engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct ClosureConfig {
    /// Disables the family limit closure entirely.
    pub disable_limit_rule: bool,
    /// Start index of the stabilization tail; default count/2.
    pub tail_start: Option<usize>,
    /// Restrict the limit rule to these families (componentwise relation).
    pub family_filter: Option<BTreeSet<String>>,
}

/// Finest equivalence respecting the collapse family: alternates the
/// connectivity closure (atoms of one element join; intersecting elements
/// chain) with the family limit closure until no merge occurs.
pub fn finest_relation(
    t: &TruncatedCompactum,
    collapse: &[CollapseElement],
    cfg: &ClosureConfig,
) -> Result<Partition, RelationError> {
    let mut uf = UnionFind::new(t.atoms.len());
    let mut trace = ClosureTrace::default();

    // Connectivity closure, round 0. Element membership is containment:
    // an atom belongs to an element iff its cell is a subset of it.
    let mut element_atoms: Vec<Vec<AtomId>> = Vec::with_capacity(collapse.len());
    for el in collapse {
        let atoms = t.atoms_within(&el.geometry);
        let rects: Vec<Rect> = atoms.iter().map(|&a| t.atom(a).rect.clone()).collect();
        for part in el.geometry.parts() {
            if !rect_covered_by(part, &rects) {
                return Err(RelationError::NonCoveredCollapse { label: el.label.clone() });
            }
        }
        element_atoms.push(atoms);
    }
    let mut merges = Vec::new();
    for (el, atoms) in collapse.iter().zip(&element_atoms) {
        for w in atoms.windows(2) {
            if uf.union(w[0], w[1]) {
                merges.push(MergeRecord {
                    from: w[1],
                    into: w[0],
                    rule: MergeRule::CollapseElement { label: el.label.clone() },
                });
            }
        }
    }
    for i in 0..collapse.len() {
        for j in i + 1..collapse.len() {
            if set_distance(&collapse[i].geometry, &collapse[j].geometry).is_zero() {
                let (a, b) = (element_atoms[i][0], element_atoms[j][0]);
                if uf.union(a, b) {
                    merges.push(MergeRecord {
                        from: b,
                        into: a,
                        rule: MergeRule::ElementChain {
                            a: collapse[i].label.clone(),
                            b: collapse[j].label.clone(),
                        },
                    });
                }
            }
        }
    }
    trace.rounds.push(RoundRecord { round: 0, merges });

    // Family limit closure: repeat sweeps until a fixpoint.
    if !cfg.disable_limit_rule {
        let mut round = 1;
        loop {
            let mut merges = Vec::new();
            for f in &t.spec.families {
                if let Some(filter) = &cfg.family_filter {
                    if !filter.contains(&f.name) {
                        continue;
                    }
                }
                if !matches!(f.limit, LimitClause::Named(_)) {
                    continue;
                }
                merges.extend(apply_limit_rule(t, f, &mut uf, cfg));
            }
            let progressed = !merges.is_empty();
            if progressed {
                trace.rounds.push(RoundRecord { round, merges });
                round += 1;
            } else {
                break;
            }
        }
    }

    Ok(Partition::from_uf(t, &mut uf, trace))
}

/// One application of the limit closure to one named-limit family.
///
/// The rule models the successor step of the transfinite construction at
/// finite scale: when every tail member lies in a single class and all tail
/// members carry the identical class-augmentation B, the limit of the member
/// classes is (declared limit) ∪ geom(B); if that set is a nondegenerate
/// continuum, all classes of atoms inside it join.
fn apply_limit_rule(
    t: &TruncatedCompactum,
    family: &crate::cdl::FamilyDecl,
    uf: &mut UnionFind,
    cfg: &ClosureConfig,
) -> Vec<MergeRecord> {
    let members = t.family_members(&family.name);
    let count = members.len();
    if count < 3 {
        return Vec::new();
    }
    let tail_start = cfg.tail_start.unwrap_or(count / 2).min(count - 2);

    // Class membership per root over the whole atom set.
    let mut root_atoms: BTreeMap<u32, Vec<AtomId>> = BTreeMap::new();
    for a in 0..t.atoms.len() as u32 {
        root_atoms.entry(uf.find(a)).or_default().push(a);
    }

    let mut augmentation: Option<BTreeSet<AtomId>> = None;
    for (_, pid) in &members[tail_start..] {
        let atoms = &t.piece_atoms[*pid as usize];
        let root = uf.find(atoms[0]);
        if atoms.iter().any(|&a| uf.find(a) != root) {
            return Vec::new();
        }
        let member_set: BTreeSet<AtomId> = atoms.iter().copied().collect();
        let aug: BTreeSet<AtomId> = root_atoms[&root]
            .iter()
            .copied()
            .filter(|a| !member_set.contains(a))
            .collect();
        match &augmentation {
            None => augmentation = Some(aug),
            Some(prev) if *prev == aug => {}
            Some(_) => return Vec::new(),
        }
    }
    let aug = augmentation.unwrap_or_default();

    let LimitClause::Named(limit_name) = &family.limit else {
        return Vec::new();
    };
    let continuum = t.spec.continuum(limit_name).expect("validated at parse");
    let limit_geometry =
        crate::cdl::instantiate_continuum(continuum).expect("valid continuum template");
    let mut parts: Vec<Rect> = limit_geometry.parts().to_vec();
    parts.extend(aug.iter().map(|&a| t.atom(a).rect.clone()));
    if !is_connected(&parts) {
        return Vec::new();
    }
    let joined = PieceGeometry::from_parts_unchecked(parts);
    if !joined.diameter().is_positive() {
        return Vec::new();
    }

    let targets = t.atoms_within(&joined);
    if targets.len() < 2 {
        return Vec::new();
    }
    let heuristic = !aug.is_empty();
    let anchor = targets[0];
    let mut merges = Vec::new();
    for &a in &targets[1..] {
        if uf.union(anchor, a) {
            merges.push(MergeRecord {
                from: a,
                into: anchor,
                rule: MergeRule::LimitRule {
                    family: family.name.clone(),
                    heuristic,
                },
            });
        }
    }
    merges
}

/// Re-runs both closures against an existing partition and reports how many
/// merges they would add; zero certifies a fixpoint.
pub fn closure_deficit(
    t: &TruncatedCompactum,
    collapse: &[CollapseElement],
    cfg: &ClosureConfig,
    p: &Partition,
) -> Result<usize, RelationError> {
    let mut uf = UnionFind::new(t.atoms.len());
    for (rep, info) in p.classes() {
        for &a in &info.atoms {
            uf.union(rep, a);
        }
    }
    let mut merged = 0usize;
    for el in collapse {
        let atoms = t.atoms_within(&el.geometry);
        if atoms.is_empty() {
            return Err(RelationError::NonCoveredCollapse { label: el.label.clone() });
        }
        for w in atoms.windows(2) {
            if uf.union(w[0], w[1]) {
                merged += 1;
            }
        }
    }
    for i in 0..collapse.len() {
        for j in i + 1..collapse.len() {
            if set_distance(&collapse[i].geometry, &collapse[j].geometry).is_zero() {
                let (a, b) = (
                    t.atoms_within(&collapse[i].geometry)[0],
                    t.atoms_within(&collapse[j].geometry)[0],
                );
                if uf.union(a, b) {
                    merged += 1;
                }
            }
        }
    }
    if !cfg.disable_limit_rule {
        for f in &t.spec.families {
            if matches!(f.limit, LimitClause::Named(_)) {
                merged += apply_limit_rule(t, f, &mut uf, cfg).len();
            }
        }
    }
    Ok(merged)
}

// ---------------------------------------------------------------------------
// FS and componentwise relations
// ---------------------------------------------------------------------------

/// Finest relation respecting all nondegenerate declared limit continua.
pub fn fs_relation(t: &TruncatedCompactum) -> Result<Partition, RelationError> {
    let collapse: Vec<CollapseElement> = declared_limits(t)
        .into_iter()
        .filter(|l| l.nondegenerate)
        .map(|l| CollapseElement {
            label: l.label(),
            geometry: l.geometry,
        })
        .collect();
    finest_relation(t, &collapse, &ClosureConfig::default())
}

/// Componentwise relation: connected components of the atom graph are
/// processed independently, each collapsing only the limit continua whose
/// witnesses live inside that component. Never merges across components.
pub fn comp_relation(t: &TruncatedCompactum) -> Result<Partition, RelationError> {
    let comps = t.components();
    let mut comp_of = vec![usize::MAX; t.atoms.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for &a in comp {
            comp_of[a as usize] = ci;
        }
    }
    let piece_comp = |pid: u32| comp_of[t.piece_atoms[pid as usize][0] as usize];

    let mut collapse = Vec::new();
    let mut internal_families: BTreeSet<String> = BTreeSet::new();
    for l in declared_limits(t) {
        if !l.nondegenerate {
            continue;
        }
        let members = t.family_members(&l.family);
        let internal = match l.kind {
            LimitKind::Named => {
                let atoms = t.atoms_within(&l.geometry);
                if atoms.is_empty() {
                    false
                } else {
                    let c = comp_of[atoms[0] as usize];
                    let limit_in = atoms.iter().all(|&a| comp_of[a as usize] == c);
                    let witness_in = l.witness_params.iter().all(|p| {
                        members
                            .iter()
                            .find(|(q, _)| *q == p)
                            .map(|(_, pid)| piece_comp(*pid) == c)
                            .unwrap_or(false)
                    });
                    if limit_in && witness_in {
                        internal_families.insert(l.family.clone());
                    }
                    limit_in && witness_in
                }
            }
            LimitKind::SelfAccumulation => {
                let member = l.member.as_ref().expect("self limits carry a member");
                let own = members
                    .iter()
                    .find(|(q, _)| *q == member)
                    .map(|(_, pid)| piece_comp(*pid));
                match own {
                    None => false,
                    Some(c) => l.witness_params.iter().any(|p| {
                        members
                            .iter()
                            .find(|(q, _)| *q == p)
                            .map(|(_, pid)| piece_comp(*pid) == c)
                            .unwrap_or(false)
                    }),
                }
            }
            LimitKind::PointLimit => false,
        };
        if internal {
            collapse.push(CollapseElement {
                label: l.label(),
                geometry: l.geometry,
            });
        }
    }
    let cfg = ClosureConfig {
        family_filter: Some(internal_families),
        ..ClosureConfig::default()
    };
    finest_relation(t, &collapse, &cfg)
}

// ---------------------------------------------------------------------------
// Quotient pseudo-metric
// ---------------------------------------------------------------------------

const UNREACHABLE: u128 = u128::MAX;

/// All-pairs chain-infimum approximation of the quotient pseudo-metric:
/// shortest paths over atom adjacency with edge weight ½(diam a + diam b)
/// and free hops inside classes. Distances are exact rationals stored on a
/// common integer scale.
pub struct QuotientMetric {
    n: usize,
    /// Distances are dist[i*n+j] / scale.
    scale: BigInt,
    dist: Vec<u128>,
    /// Atom diameters on the same scale.
    diam_scaled: Vec<u128>,
}

impl QuotientMetric {
    pub fn get(&self, a: AtomId, b: AtomId) -> Option<Scalar> {
        let v = self.dist[a as usize * self.n + b as usize];
        (v != UNREACHABLE).then(|| {
            Scalar::from_big(num_rational::BigRational::new(
                BigInt::from(v),
                self.scale.clone(),
            ))
        })
    }

    fn get_scaled(&self, a: AtomId, b: AtomId) -> Option<u128> {
        let v = self.dist[a as usize * self.n + b as usize];
        (v != UNREACHABLE).then_some(v)
    }

    fn to_scalar(&self, v: u128) -> Scalar {
        Scalar::from_big(num_rational::BigRational::new(
            BigInt::from(v),
            self.scale.clone(),
        ))
    }
}

pub fn quotient_metric(t: &TruncatedCompactum, p: &Partition) -> QuotientMetric {
    let n = t.atoms.len();
    assert_eq!(p.n_atoms(), n, "partition universe mismatch");
    let diams: Vec<Scalar> = t.atoms.iter().map(|a| a.rect.diameter()).collect();
    // scale = 2 * lcm(denominators): both diameters and half-sums land on it.
    let scale = common_denominator(diams.iter()) * BigInt::from(2);
    let diam_scaled: Vec<u128> = diams
        .iter()
        .map(|d| {
            d.scaled_int(&scale)
                .to_u128()
                .expect("diameter scale within range")
        })
        .collect();

    // Adjacency edges carry ½(diam a + diam b); class stars are free.
    let mut graph: Vec<Vec<(u32, u128)>> = vec![Vec::new(); n];
    for a in 0..n {
        for &b in &t.adjacency[a] {
            if (b as usize) > a {
                let w = (diam_scaled[a] + diam_scaled[b as usize]) / 2;
                graph[a].push((b, w));
                graph[b as usize].push((a as u32, w));
            }
        }
    }
    for (rep, info) in p.classes() {
        for &a in &info.atoms {
            if a != rep {
                graph[rep as usize].push((a, 0));
                graph[a as usize].push((rep, 0));
            }
        }
    }

    let mut dist = vec![UNREACHABLE; n * n];
    let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<(u128, u32)>> =
        std::collections::BinaryHeap::new();
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = 0;
        heap.clear();
        heap.push(std::cmp::Reverse((0, src as u32)));
        while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
            if d > row[v as usize] {
                continue;
            }
            for &(w, wt) in &graph[v as usize] {
                let nd = d + wt;
                if nd < row[w as usize] {
                    row[w as usize] = nd;
                    heap.push(std::cmp::Reverse((nd, w)));
                }
            }
        }
    }
    QuotientMetric { n, scale, dist, diam_scaled }
}

/// Diameter of a piece in the quotient: max over its atom pairs of the
/// metric distance plus half the endpoint atom diameters; pairs sharing a
/// class contribute zero.
pub fn quotient_diameter(
    piece_atoms: &[AtomId],
    p: &Partition,
    qm: &QuotientMetric,
) -> Scalar {
    let mut best: u128 = 0;
    for (i, &a) in piece_atoms.iter().enumerate() {
        for &b in &piece_atoms[i + 1..] {
            if p.same_class(a, b) {
                continue;
            }
            if let Some(d) = qm.get_scaled(a, b) {
                let v = d + (qm.diam_scaled[a as usize] + qm.diam_scaled[b as usize]) / 2;
                if v > best {
                    best = v;
                }
            }
        }
    }
    qm.to_scalar(best)
}

// ---------------------------------------------------------------------------
// Finitely-Suslinian-at-scale check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub rep: AtomId,
    pub size: usize,
    pub diameter: Scalar,
}

#[derive(Debug, Clone, Serialize)]
pub struct FsViolation {
    pub family: String,
    /// Parameters of the pairwise quotient-disjoint members, in family order.
    pub witness: Vec<String>,
    pub diameters: Vec<Scalar>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientReport {
    pub epsilon: Scalar,
    pub k: usize,
    pub class_count: usize,
    /// Classes whose geometry exceeds the atom granularity.
    pub nondegenerate_classes: Vec<ClassSummary>,
    pub violations: Vec<FsViolation>,
    pub pass: bool,
}

/// Violation iff some declared family has ≥ k members, each of quotient
/// diameter ≥ ε, that are pairwise quotient-disjoint: their images share no
/// class and their saturated geometries are positively separated. A member's
/// image includes every merged class touching it, which is what glues
/// members together through collapsed continua.
pub fn check_fs_at_scale(
    t: &TruncatedCompactum,
    p: &Partition,
    qm: &QuotientMetric,
    epsilon: &Scalar,
    k: usize,
) -> QuotientReport {
    assert!(k >= 3, "the disjoint-family threshold k must be at least 3");
    let nondegenerate_classes: Vec<ClassSummary> = p
        .classes()
        .filter(|(_, c)| c.geometry.diameter() > t.delta)
        .map(|(rep, c)| ClassSummary {
            rep,
            size: c.atoms.len(),
            diameter: c.geometry.diameter(),
        })
        .collect();

    let merged: Vec<(AtomId, &ClassInfo)> = p.merged_classes().collect();
    let mut violations = Vec::new();

    for f in &t.spec.families {
        let members = t.family_members(&f.name);
        if members.len() < k {
            continue;
        }
        struct MemberView {
            param: String,
            image: BTreeSet<AtomId>,
            saturated: PieceGeometry,
            qdiam: Scalar,
        }
        let mut views = Vec::with_capacity(members.len());
        for (param, pid) in &members {
            let atoms = &t.piece_atoms[*pid as usize];
            let geometry = &t.piece(*pid).geometry;
            let mut image: BTreeSet<AtomId> = atoms.iter().map(|&a| p.rep(a)).collect();
            let mut sat_parts: Vec<Rect> = geometry.parts().to_vec();
            for (rep, info) in &merged {
                if image.contains(rep) {
                    continue;
                }
                if set_distance(&info.geometry, geometry).is_zero() {
                    image.insert(*rep);
                    sat_parts.extend(info.geometry.parts().iter().cloned());
                }
            }
            views.push(MemberView {
                param: param.to_string(),
                image,
                saturated: PieceGeometry::from_parts_unchecked(sat_parts),
                qdiam: quotient_diameter(atoms, p, qm),
            });
        }
        let qualifying: Vec<usize> = (0..views.len())
            .filter(|&i| views[i].qdiam >= *epsilon)
            .collect();
        if qualifying.len() < k {
            continue;
        }
        let disjoint = |i: usize, j: usize| -> bool {
            views[i].image.is_disjoint(&views[j].image)
                && set_distance(&views[i].saturated, &views[j].saturated).is_positive()
        };
        if let Some(witness) = find_clique(&qualifying, k, &disjoint) {
            violations.push(FsViolation {
                family: f.name.clone(),
                witness: witness.iter().map(|&i| views[i].param.clone()).collect(),
                diameters: witness.iter().map(|&i| views[i].qdiam.clone()).collect(),
            });
        }
    }

    QuotientReport {
        epsilon: epsilon.clone(),
        k,
        class_count: p.class_count(),
        nondegenerate_classes,
        pass: violations.is_empty(),
        violations,
    }
}

/// Lexicographically first clique of the given size in the disjointness
/// graph over `vertices`.
fn find_clique(
    vertices: &[usize],
    k: usize,
    edge: &dyn Fn(usize, usize) -> bool,
) -> Option<Vec<usize>> {
    fn extend(
        current: &mut Vec<usize>,
        candidates: &[usize],
        k: usize,
        edge: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        if current.len() == k {
            return true;
        }
        if current.len() + candidates.len() < k {
            return false;
        }
        for (pos, &c) in candidates.iter().enumerate() {
            if current.iter().all(|&m| edge(m, c)) {
                current.push(c);
                if extend(current, &candidates[pos + 1..], k, edge) {
                    return true;
                }
                current.pop();
            }
        }
        false
    }
    let mut current = Vec::with_capacity(k);
    extend(&mut current, vertices, k, edge).then_some(current)
}

// ---------------------------------------------------------------------------
// Refinement, collapse verification, class graph
// ---------------------------------------------------------------------------

/// True iff every class of `fine` is contained in a class of `coarse`.
pub fn refines(fine: &Partition, coarse: &Partition) -> Result<bool, RelationError> {
    if fine.n_atoms() != coarse.n_atoms() {
        return Err(RelationError::UniverseMismatch);
    }
    let mut target: BTreeMap<AtomId, AtomId> = BTreeMap::new();
    for a in 0..fine.n_atoms() as u32 {
        let r1 = fine.rep(a);
        let r2 = coarse.rep(a);
        match target.entry(r1) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(r2);
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                if *e.get() != r2 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub enum CollapseCheck {
    Pass,
    Violation {
        limit: String,
        /// Distinct classes meeting the split limit continuum.
        classes: Vec<AtomId>,
    },
}

/// Checks that every nondegenerate declared limit continuum lies in one
/// class; the conclusion that holds for quotients of unshielded inputs.
pub fn verify_collapse(t: &TruncatedCompactum, p: &Partition) -> CollapseCheck {
    for l in declared_limits(t) {
        if !l.nondegenerate {
            continue;
        }
        let atoms = t.atoms_within(&l.geometry);
        let mut reps: Vec<AtomId> = atoms.iter().map(|&a| p.rep(a)).collect();
        reps.sort_unstable();
        reps.dedup();
        if reps.len() > 1 {
            return CollapseCheck::Violation {
                limit: l.label(),
                classes: reps,
            };
        }
    }
    CollapseCheck::Pass
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassGraph {
    pub nodes: Vec<AtomId>,
    /// Edges between classes whose geometries meet.
    pub edges: Vec<(AtomId, AtomId)>,
}

pub fn class_graph(p: &Partition) -> ClassGraph {
    let nodes: Vec<AtomId> = p.classes().map(|(r, _)| r).collect();
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let a = p.class(nodes[i]);
            let b = p.class(nodes[j]);
            if set_distance(&a.geometry, &b.geometry).is_zero() {
                edges.push((nodes[i], nodes[j]));
            }
        }
    }
    ClassGraph { nodes, edges }
}

// ---------------------------------------------------------------------------
// Named partition constructors for the classical comb quotients
// ---------------------------------------------------------------------------

/// Collapse one named continuum to a point (the comb's `h`).
pub fn collapse_continuum(
    t: &TruncatedCompactum,
    name: &str,
) -> Result<Partition, RelationError> {
    let piece = t
        .piece_by_label(name)
        .ok_or_else(|| RelationError::InvalidPartition(format!("no piece named {name}")))?;
    let collapse = [CollapseElement {
        label: name.to_string(),
        geometry: piece.geometry.clone(),
    }];
    finest_relation(t, &collapse, &ClosureConfig { disable_limit_rule: true, ..Default::default() })
}

/// Collapse every dyadic-family member with denominator greater than `n`
/// (the comb's φ_n).
pub fn collapse_thin_teeth(
    t: &TruncatedCompactum,
    n: u32,
) -> Result<Partition, RelationError> {
    let mut collapse = Vec::new();
    for p in &t.pieces {
        if let crate::truncation::PieceOrigin::Member {
            param: crate::cdl::ParamValue::Dyadic { den, .. },
            ..
        } = &p.origin
        {
            if *den > n {
                collapse.push(CollapseElement {
                    label: p.origin.label(),
                    geometry: p.geometry.clone(),
                });
            }
        }
    }
    finest_relation(t, &collapse, &ClosureConfig { disable_limit_rule: true, ..Default::default() })
}
