//! Finite truncation of a symbolic compactum: instantiate family members to
//! a chosen depth, atomize every piece at granularity δ with cuts at mutual
//! intersection points, and build the atom adjacency graph.

use serde::Serialize;
use thiserror::Error;

use crate::cdl::{
    enumerate_params, instantiate_continuum, instantiate_member, CompactumSpec, ParamValue,
};
use crate::geometry::{subdivide, GeometryError, PieceGeometry, Point, Rect, Scalar};

pub type AtomId = u32;
pub type PieceId = u32;

#[derive(Debug, Error)]
pub enum TruncateError {
    #[error("invalid depth for family {family}: {msg}")]
    InvalidDepth { family: String, msg: String },
    #[error("piece {piece} instantiates to invalid geometry: {source}")]
    InvalidPiece {
        piece: String,
        #[source]
        source: GeometryError,
    },
    #[error("truncation is empty")]
    Empty,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Depth parameters: N bounds integer families, K bounds dyadic denominators
/// by 2^K, k fixes the word length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Depth {
    pub ints: u32,
    pub dyadics: u32,
    pub words: u32,
}

impl Depth {
    pub fn new(ints: u32, dyadics: u32, words: u32) -> Self {
        Depth { ints, dyadics, words }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PieceOrigin {
    Continuum(String),
    Member { family: String, param: ParamValue },
}

impl PieceOrigin {
    pub fn label(&self) -> String {
        match self {
            PieceOrigin::Continuum(n) => n.clone(),
            PieceOrigin::Member { family, param } => format!("{family}:{param}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PieceInst {
    pub id: PieceId,
    pub origin: PieceOrigin,
    pub geometry: PieceGeometry,
}

/// A small connected cell of the truncation; the finite carrier of points.
#[derive(Debug, Clone)]
pub struct Atom {
    pub id: AtomId,
    pub rect: Rect,
    pub piece: PieceId,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TruncateOptions {
    /// With this set, a zero depth instantiates the family empty instead of
    /// failing.
    pub allow_empty: bool,
}

#[derive(Debug)]
pub struct TruncatedCompactum {
    pub spec: CompactumSpec,
    pub depth: Depth,
    pub delta: Scalar,
    pub pieces: Vec<PieceInst>,
    pub atoms: Vec<Atom>,
    /// Sorted neighbor lists; edge iff the closed atoms meet.
    pub adjacency: Vec<Vec<AtomId>>,
    pub piece_atoms: Vec<Vec<AtomId>>,
}

impl TruncatedCompactum {
    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id as usize]
    }

    pub fn piece(&self, id: PieceId) -> &PieceInst {
        &self.pieces[id as usize]
    }

    pub fn piece_by_label(&self, label: &str) -> Option<&PieceInst> {
        self.pieces.iter().find(|p| p.origin.label() == label)
    }

    /// Members of one family in parameter order, as (param, piece id).
    pub fn family_members(&self, family: &str) -> Vec<(&ParamValue, PieceId)> {
        self.pieces
            .iter()
            .filter_map(|p| match &p.origin {
                PieceOrigin::Member { family: f, param } if f == family => Some((param, p.id)),
                _ => None,
            })
            .collect()
    }

    /// Atom ids whose rects are contained in the given geometry.
    pub fn atoms_within(&self, geometry: &PieceGeometry) -> Vec<AtomId> {
        self.atoms
            .iter()
            .filter(|a| geometry.covers_rect(&a.rect))
            .map(|a| a.id)
            .collect()
    }

    /// Connected components of the atom graph; each sorted, components in
    /// order of their smallest atom.
    pub fn components(&self) -> Vec<Vec<AtomId>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start as AtomId];
            seen[start] = true;
            let mut stack = vec![start as AtomId];
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v as usize] {
                    if !seen[w as usize] {
                        seen[w as usize] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Minimal positive distance between distinct pieces, if any pair is
    /// positively separated.
    pub fn min_feature_gap(&self) -> Option<Scalar> {
        let mut best: Option<Scalar> = None;
        for i in 0..self.pieces.len() {
            for j in i + 1..self.pieces.len() {
                let d = self.pieces[i].geometry.distance(&self.pieces[j].geometry);
                if d.is_zero() {
                    continue;
                }
                best = Some(match best.take() {
                    None => d,
                    Some(cur) => cur.min(d),
                });
            }
        }
        best
    }
}

/// Instantiates all pieces within depth, computes mutual intersection
/// markers, atomizes with [`subdivide`], and builds the adjacency graph.
pub fn truncate(
    spec: &CompactumSpec,
    depth: Depth,
    delta: &Scalar,
    opts: TruncateOptions,
) -> Result<TruncatedCompactum, TruncateError> {
    assert!(delta.is_positive(), "atom granularity must be positive");
    let mut pieces: Vec<PieceInst> = Vec::new();
    for c in &spec.continua {
        let geometry = instantiate_continuum(c).map_err(|source| TruncateError::InvalidPiece {
            piece: c.name.clone(),
            source,
        })?;
        pieces.push(PieceInst {
            id: pieces.len() as PieceId,
            origin: PieceOrigin::Continuum(c.name.clone()),
            geometry,
        });
    }
    for f in &spec.families {
        let bound = match f.domain {
            crate::cdl::ParamDomain::Nat => depth.ints,
            crate::cdl::ParamDomain::Dyadic => depth.dyadics,
            crate::cdl::ParamDomain::Word => depth.words,
        };
        if bound == 0 && !opts.allow_empty {
            return Err(TruncateError::InvalidDepth {
                family: f.name.clone(),
                msg: "depth parameter must be at least 1 (pass allow-empty to instantiate none)"
                    .into(),
            });
        }
        for param in enumerate_params(f.domain, depth.ints, depth.dyadics, depth.words) {
            let label = format!("{}:{param}", f.name);
            let geometry =
                instantiate_member(f, &param).map_err(|source| TruncateError::InvalidPiece {
                    piece: label,
                    source,
                })?;
            pieces.push(PieceInst {
                id: pieces.len() as PieceId,
                origin: PieceOrigin::Member {
                    family: f.name.clone(),
                    param,
                },
                geometry,
            });
        }
    }
    if pieces.is_empty() {
        return Err(TruncateError::Empty);
    }

    // Mutual intersection markers: corners of every pairwise part overlap.
    let mut markers: Vec<Vec<Point>> = vec![Vec::new(); pieces.len()];
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            for pa in pieces[i].geometry.parts() {
                for pb in pieces[j].geometry.parts() {
                    if let Some(cross) = pa.intersection(pb) {
                        for corner in cross.corners() {
                            if !markers[i].contains(&corner) {
                                markers[i].push(corner.clone());
                            }
                            if !markers[j].contains(&corner) {
                                markers[j].push(corner);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut atoms: Vec<Atom> = Vec::new();
    let mut piece_atoms: Vec<Vec<AtomId>> = Vec::with_capacity(pieces.len());
    for p in &pieces {
        let cells = subdivide(&p.geometry, delta, &markers[p.id as usize])?;
        let mut ids = Vec::with_capacity(cells.len());
        for rect in cells {
            let id = atoms.len() as AtomId;
            atoms.push(Atom { id, rect, piece: p.id });
            ids.push(id);
        }
        piece_atoms.push(ids);
    }

    let adjacency = build_adjacency(&atoms);

    let t = TruncatedCompactum {
        spec: spec.clone(),
        depth,
        delta: delta.clone(),
        pieces,
        atoms,
        adjacency,
        piece_atoms,
    };

    // Every piece's atoms must induce a connected subgraph.
    for p in &t.pieces {
        if !t.atom_set_connected(&t.piece_atoms[p.id as usize]) {
            return Err(TruncateError::InvalidPiece {
                piece: p.origin.label(),
                source: GeometryError::DisconnectedGeometry,
            });
        }
    }
    Ok(t)
}

impl TruncatedCompactum {
    /// Connectivity of a set of atoms in the induced subgraph.
    pub fn atom_set_connected(&self, set: &[AtomId]) -> bool {
        if set.is_empty() {
            return false;
        }
        let member: std::collections::BTreeSet<AtomId> = set.iter().copied().collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![set[0]];
        seen.insert(set[0]);
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v as usize] {
                if member.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == member.len()
    }
}

/// Adjacency lists over arbitrary atoms: edge iff the closed cells meet.
/// Exposed for synthetic truncations assembled directly in tests.
pub fn build_adjacency(atoms: &[Atom]) -> Vec<Vec<AtomId>> {
    let n = atoms.len();
    let mut adj: Vec<Vec<AtomId>> = vec![Vec::new(); n];
    // Sweep over atoms ordered by left edge; only pairs whose x ranges meet
    // can touch.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| atoms[a].rect.x0.cmp(&atoms[b].rect.x0).then(a.cmp(&b)));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if atoms[j].rect.x0 > atoms[i].rect.x1 {
                break;
            }
            if atoms[i].rect.touches(&atoms[j].rect) {
                adj[i].push(j as AtomId);
                adj[j].push(i as AtomId);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}
