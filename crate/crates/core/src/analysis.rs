//! Limit-continuum extraction, numeric limit scanning, θ-configuration
//! detection and irreducible chains on truncations.

use serde::Serialize;
use thiserror::Error;

use crate::cdl::{instantiate_continuum, LimitClause, ParamValue};
use crate::geometry::{hausdorff_distance, set_distance, PieceGeometry, Scalar};
use crate::truncation::{AtomId, PieceId, TruncatedCompactum};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("the atom sets lie in different components of the atom graph")]
    NoConnection,
    #[error("empty atom set")]
    EmptyAtomSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LimitKind {
    /// Family-wide named limit.
    Named,
    /// Per-member symbolic point limit.
    PointLimit,
    /// Member of an accumulates-self family: the member itself is the limit.
    SelfAccumulation,
}

/// A declared limit continuum of a truncation: a (possibly degenerate)
/// Hausdorff limit together with its witness family members.
#[derive(Debug, Clone, Serialize)]
pub struct LimitContinuum {
    pub family: String,
    pub kind: LimitKind,
    /// Member parameter for per-member limits.
    pub member: Option<ParamValue>,
    pub geometry: PieceGeometry,
    /// Parameter subsequence whose members witness the limit: pairwise
    /// disjoint with nonincreasing Hausdorff distance for named limits;
    /// sibling members for self-accumulating families.
    pub witness_params: Vec<ParamValue>,
    pub nondegenerate: bool,
}

impl LimitContinuum {
    pub fn label(&self) -> String {
        match (&self.kind, &self.member) {
            (LimitKind::Named, _) => format!("lim {}", self.family),
            (_, Some(m)) => format!("lim {}:{m}", self.family),
            _ => format!("lim {}", self.family),
        }
    }
}

/// One entry per family limit clause (named limits), or per member for
/// point limits and accumulates-self families. Degenerate (point) limits are
/// flagged `nondegenerate: false`; those are recorded but excluded from
/// collapse input.
pub fn declared_limits(t: &TruncatedCompactum) -> Vec<LimitContinuum> {
    let mut out = Vec::new();
    for f in &t.spec.families {
        let members = t.family_members(&f.name);
        if members.is_empty() {
            continue;
        }
        match &f.limit {
            LimitClause::Named(name) => {
                let c = t.spec.continuum(name).expect("validated at parse");
                let geometry = instantiate_continuum(c).expect("valid continuum");
                let witness_params = disjoint_witness(t, &members, &geometry);
                let nondegenerate = geometry.diameter().is_positive();
                out.push(LimitContinuum {
                    family: f.name.clone(),
                    kind: LimitKind::Named,
                    member: None,
                    geometry,
                    witness_params,
                    nondegenerate,
                });
            }
            LimitClause::Point(ex, ey) => {
                for (param, _) in &members {
                    let p = crate::geometry::Point::new(ex.eval(param), ey.eval(param));
                    out.push(LimitContinuum {
                        family: f.name.clone(),
                        kind: LimitKind::PointLimit,
                        member: Some((*param).clone()),
                        geometry: PieceGeometry::single(crate::geometry::Rect::point(&p)),
                        witness_params: vec![(*param).clone()],
                        nondegenerate: false,
                    });
                }
            }
            LimitClause::SelfAccumulation => {
                for (param, pid) in &members {
                    let geometry = t.piece(*pid).geometry.clone();
                    let witness_params = members
                        .iter()
                        .filter(|(q, _)| *q != *param)
                        .map(|(q, _)| (*q).clone())
                        .collect();
                    let nondegenerate = geometry.diameter().is_positive();
                    out.push(LimitContinuum {
                        family: f.name.clone(),
                        kind: LimitKind::SelfAccumulation,
                        member: Some((*param).clone()),
                        geometry,
                        witness_params,
                        nondegenerate,
                    });
                }
            }
        }
    }
    out
}

/// Maximal-in-order subsequence of members that is pairwise positively
/// separated with nonincreasing Hausdorff distance to the limit.
fn disjoint_witness(
    t: &TruncatedCompactum,
    members: &[(&ParamValue, PieceId)],
    limit: &PieceGeometry,
) -> Vec<ParamValue> {
    let mut kept: Vec<(ParamValue, PieceId, Scalar)> = Vec::new();
    for (param, pid) in members {
        let g = &t.piece(*pid).geometry;
        let d = hausdorff_distance(g, limit);
        let disjoint = kept
            .iter()
            .all(|(_, kpid, _)| set_distance(g, &t.piece(*kpid).geometry).is_positive());
        let ordered = kept.last().map(|(_, _, last)| d <= *last).unwrap_or(true);
        if disjoint && ordered {
            kept.push(((*param).clone(), *pid, d));
        }
    }
    kept.into_iter().map(|(p, _, _)| p).collect()
}

/// Exact verification of the limit-continuum invariants; used by tests.
pub fn verify_limit_witness(t: &TruncatedCompactum, lc: &LimitContinuum) -> bool {
    let pieces: Vec<&PieceGeometry> = lc
        .witness_params
        .iter()
        .filter_map(|p| {
            t.family_members(&lc.family)
                .into_iter()
                .find(|(q, _)| *q == p)
                .map(|(_, pid)| &t.piece(pid).geometry)
        })
        .collect();
    if pieces.len() != lc.witness_params.len() {
        return false;
    }
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            if !set_distance(pieces[i], pieces[j]).is_positive() {
                return false;
            }
        }
    }
    if lc.kind == LimitKind::Named {
        let mut last: Option<Scalar> = None;
        for g in &pieces {
            let d = hausdorff_distance(g, &lc.geometry);
            if let Some(prev) = &last {
                if d > *prev {
                    return false;
                }
            }
            last = Some(d);
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Numeric limit scan
// ---------------------------------------------------------------------------

/// A chain of pairwise disjoint pieces with strictly decreasing successive
/// Hausdorff distances; advisory evidence of an (undeclared) limit continuum.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateLimit {
    /// Piece labels along the chain.
    pub witness: Vec<String>,
    /// Geometry of the final chain element, standing in for the limit.
    pub geometry: PieceGeometry,
}

/// Scans for sequences of at least `count` pairwise disjoint pieces of
/// diameter ≥ ε with strictly decreasing successive Hausdorff distances.
/// Advisory only: a lint for undeclared limits.
pub fn numeric_limit_scan(
    t: &TruncatedCompactum,
    epsilon: &Scalar,
    count: usize,
) -> Vec<CandidateLimit> {
    assert!(count >= 3, "a limit chain needs at least three pieces");
    let qualifying: Vec<PieceId> = t
        .pieces
        .iter()
        .filter(|p| p.geometry.diameter() >= *epsilon)
        .map(|p| p.id)
        .collect();
    let n = qualifying.len();
    if n < count {
        return Vec::new();
    }
    // Pairwise caches over the qualifying pieces.
    let mut hd = vec![vec![Scalar::zero(); n]; n];
    let mut disj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = &t.piece(qualifying[i]).geometry;
            let b = &t.piece(qualifying[j]).geometry;
            let d = set_distance(a, b);
            disj[i][j] = d.is_positive();
            disj[j][i] = disj[i][j];
            if disj[i][j] {
                let h = hausdorff_distance(a, b);
                hd[i][j] = h.clone();
                hd[j][i] = h;
            }
        }
    }

    let mut found: Vec<Vec<usize>> = Vec::new();
    let cap = 16usize;
    'seeds: for a in 0..n {
        for b in 0..n {
            if a == b || !disj[a][b] {
                continue;
            }
            let mut chain = vec![a, b];
            if extend_chain(&mut chain, count, &hd, &disj) {
                let c: Vec<usize> = chain;
                if !found.contains(&c) {
                    found.push(c);
                }
                if found.len() >= cap {
                    break 'seeds;
                }
            }
        }
    }
    found
        .into_iter()
        .map(|chain| CandidateLimit {
            witness: chain
                .iter()
                .map(|&i| t.piece(qualifying[i]).origin.label())
                .collect(),
            geometry: t.piece(qualifying[*chain.last().unwrap()]).geometry.clone(),
        })
        .collect()
}

/// Depth-first extension keeping pairwise disjointness and strictly
/// decreasing successive distances; candidates are tried far-first so the
/// chain keeps room to descend.
fn extend_chain(
    chain: &mut Vec<usize>,
    count: usize,
    hd: &[Vec<Scalar>],
    disj: &[Vec<bool>],
) -> bool {
    if chain.len() >= count {
        return true;
    }
    let last = chain[chain.len() - 1];
    let prev = chain[chain.len() - 2];
    let bound = &hd[prev][last];
    let mut cands: Vec<usize> = (0..hd.len())
        .filter(|&c| {
            !chain.contains(&c)
                && chain.iter().all(|&m| disj[m][c])
                && hd[last][c] < *bound
        })
        .collect();
    cands.sort_by(|&x, &y| hd[last][y].cmp(&hd[last][x]).then(x.cmp(&y)));
    for c in cands {
        chain.push(c);
        if extend_chain(chain, count, hd, disj) {
            return true;
        }
        chain.pop();
    }
    false
}

// ---------------------------------------------------------------------------
// θ-configurations
// ---------------------------------------------------------------------------

/// Two disjoint connected piece unions joined by three pairwise disjoint
/// connectors; the obstruction to unshieldedness.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaWitness {
    pub x1_pieces: Vec<String>,
    pub x2_pieces: Vec<String>,
    pub x1_atoms: Vec<AtomId>,
    pub x2_atoms: Vec<AtomId>,
    /// Three pairwise disjoint atom chains, each meeting both sides.
    pub connectors: [Vec<AtomId>; 3],
    pub connector_pieces: [String; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaConfig {
    /// Maximum number of pieces in each of the two sides.
    pub max_pieces: usize,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig { max_pieces: 3 }
    }
}

/// Searches piece-level combinations for a θ-configuration: sides are
/// connected unions of at most `max_pieces` pieces, connectors are minimal
/// atom chains within single pieces touching both sides.
pub fn detect_theta(t: &TruncatedCompactum, config: ThetaConfig) -> Option<ThetaWitness> {
    let unions = connected_piece_unions(t, config.max_pieces);
    for (i, x1) in unions.iter().enumerate() {
        for x2 in unions.iter().skip(i + 1) {
            if x1.iter().any(|p| x2.contains(p)) {
                continue;
            }
            let g1 = union_geometry(t, x1);
            let g2 = union_geometry(t, x2);
            if !set_distance(&g1, &g2).is_positive() {
                continue;
            }
            if let Some(w) = find_connectors(t, x1, x2, &g1, &g2) {
                return Some(w);
            }
        }
    }
    None
}

fn union_geometry(t: &TruncatedCompactum, pieces: &[PieceId]) -> PieceGeometry {
    let parts = pieces
        .iter()
        .flat_map(|&p| t.piece(p).geometry.parts().iter().cloned())
        .collect();
    PieceGeometry::from_parts_unchecked(parts)
}

/// Connected unions of up to `max` pieces, smallest first, deterministic.
fn connected_piece_unions(t: &TruncatedCompactum, max: usize) -> Vec<Vec<PieceId>> {
    let n = t.pieces.len();
    let mut touch = vec![vec![false; n]; n];
    for (i, a) in t.pieces.iter().enumerate() {
        for (j, b) in t.pieces.iter().enumerate().skip(i + 1) {
            if a.geometry.touches(&b.geometry) {
                touch[i][j] = true;
                touch[j][i] = true;
            }
        }
    }
    let mut out: Vec<Vec<PieceId>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    out.extend(frontier.iter().map(|v| v.iter().map(|&i| i as PieceId).collect::<Vec<_>>()));
    for _ in 1..max {
        let mut next: Vec<Vec<usize>> = Vec::new();
        for set in &frontier {
            let last = *set.last().unwrap();
            #[allow(clippy::needless_range_loop)]
            for cand in (last + 1..n).filter(|c| !set.contains(c)) {
                if set.iter().any(|&m| touch[m][cand]) {
                    let mut bigger = set.clone();
                    bigger.push(cand);
                    next.push(bigger);
                }
            }
        }
        out.extend(
            next.iter()
                .map(|v| v.iter().map(|&i| i as PieceId).collect::<Vec<_>>()),
        );
        frontier = next;
    }
    out
}

fn find_connectors(
    t: &TruncatedCompactum,
    x1: &[PieceId],
    x2: &[PieceId],
    g1: &PieceGeometry,
    g2: &PieceGeometry,
) -> Option<ThetaWitness> {
    // Candidate connectors: minimal atom chains within single pieces that
    // touch both sides.
    let mut chains: Vec<(PieceId, Vec<AtomId>, PieceGeometry)> = Vec::new();
    for p in &t.pieces {
        if x1.contains(&p.id) || x2.contains(&p.id) {
            continue;
        }
        if !p.geometry.touches(g1) || !p.geometry.touches(g2) {
            continue;
        }
        if let Some(chain) = chain_within_piece(t, p.id, g1, g2) {
            let geo = PieceGeometry::from_parts_unchecked(
                chain.iter().map(|&a| t.atom(a).rect.clone()).collect(),
            );
            chains.push((p.id, chain, geo));
        }
    }
    if chains.len() < 3 {
        return None;
    }
    // Any three pairwise positively separated chains form the witness.
    let m = chains.len();
    for a in 0..m {
        for b in a + 1..m {
            if !set_distance(&chains[a].2, &chains[b].2).is_positive() {
                continue;
            }
            for c in b + 1..m {
                if set_distance(&chains[a].2, &chains[c].2).is_positive()
                    && set_distance(&chains[b].2, &chains[c].2).is_positive()
                {
                    let x1_atoms = piece_union_atoms(t, x1);
                    let x2_atoms = piece_union_atoms(t, x2);
                    return Some(ThetaWitness {
                        x1_pieces: x1.iter().map(|&p| t.piece(p).origin.label()).collect(),
                        x2_pieces: x2.iter().map(|&p| t.piece(p).origin.label()).collect(),
                        x1_atoms,
                        x2_atoms,
                        connectors: [
                            chains[a].1.clone(),
                            chains[b].1.clone(),
                            chains[c].1.clone(),
                        ],
                        connector_pieces: [
                            t.piece(chains[a].0).origin.label(),
                            t.piece(chains[b].0).origin.label(),
                            t.piece(chains[c].0).origin.label(),
                        ],
                    });
                }
            }
        }
    }
    None
}

fn piece_union_atoms(t: &TruncatedCompactum, pieces: &[PieceId]) -> Vec<AtomId> {
    let mut out: Vec<AtomId> = pieces
        .iter()
        .flat_map(|&p| t.piece_atoms[p as usize].iter().copied())
        .collect();
    out.sort_unstable();
    out
}

/// Shortest chain of atoms inside one piece from contact with g1 to contact
/// with g2.
fn chain_within_piece(
    t: &TruncatedCompactum,
    piece: PieceId,
    g1: &PieceGeometry,
    g2: &PieceGeometry,
) -> Option<Vec<AtomId>> {
    let atoms = &t.piece_atoms[piece as usize];
    let sources: Vec<AtomId> = atoms
        .iter()
        .copied()
        .filter(|&a| g1.touches_rect(&t.atom(a).rect))
        .collect();
    let targets: std::collections::BTreeSet<AtomId> = atoms
        .iter()
        .copied()
        .filter(|&a| g2.touches_rect(&t.atom(a).rect))
        .collect();
    if sources.is_empty() || targets.is_empty() {
        return None;
    }
    let members: std::collections::BTreeSet<AtomId> = atoms.iter().copied().collect();
    bfs_chain(t, &sources, &targets, Some(&members))
}

/// BFS shortest path through the atom graph, optionally restricted to a set.
fn bfs_chain(
    t: &TruncatedCompactum,
    sources: &[AtomId],
    targets: &std::collections::BTreeSet<AtomId>,
    within: Option<&std::collections::BTreeSet<AtomId>>,
) -> Option<Vec<AtomId>> {
    use std::collections::{BTreeMap, VecDeque};
    let mut prev: BTreeMap<AtomId, AtomId> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &s in sources {
        if within.map(|w| w.contains(&s)).unwrap_or(true) && !prev.contains_key(&s) {
            prev.insert(s, s);
            if targets.contains(&s) {
                return Some(vec![s]);
            }
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &t.adjacency[v as usize] {
            if let Some(set) = within {
                if !set.contains(&w) {
                    continue;
                }
            }
            if prev.contains_key(&w) {
                continue;
            }
            prev.insert(w, v);
            if targets.contains(&w) {
                let mut path = vec![w];
                let mut cur = w;
                while prev[&cur] != cur {
                    cur = prev[&cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(w);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Irreducible chains
// ---------------------------------------------------------------------------

/// A connected atom set meeting both A and B such that removing any atom
/// breaks connectivity-with-both; the BFS-shortest chain among minimal ones.
pub fn irreducible_chain(
    t: &TruncatedCompactum,
    a: &[AtomId],
    b: &[AtomId],
) -> Result<Vec<AtomId>, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptyAtomSet);
    }
    let targets: std::collections::BTreeSet<AtomId> = b.iter().copied().collect();
    bfs_chain(t, a, &targets, None).ok_or(AnalysisError::NoConnection)
}

/// Minimality certificate: removing any atom of the chain disconnects it or
/// detaches it from A or B.
pub fn chain_is_minimal(
    t: &TruncatedCompactum,
    chain: &[AtomId],
    a: &[AtomId],
    b: &[AtomId],
) -> bool {
    let a_set: std::collections::BTreeSet<AtomId> = a.iter().copied().collect();
    let b_set: std::collections::BTreeSet<AtomId> = b.iter().copied().collect();
    for skip in chain {
        let rest: Vec<AtomId> = chain.iter().copied().filter(|x| x != skip).collect();
        if rest.is_empty() {
            continue;
        }
        let connected = t.atom_set_connected(&rest);
        let meets_a = rest.iter().any(|x| a_set.contains(x));
        let meets_b = rest.iter().any(|x| b_set.contains(x));
        if connected && meets_a && meets_b {
            return false;
        }
    }
    true
}
