//! Symbolic self-maps on truncations: piece and atom image correspondences,
//! equivariance of partitions, induced quotient maps and semiconjugacy
//! verification.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::cdl::{MapAction, MapSpec, ParamValue};
use crate::geometry::{rect_covered_by, PieceGeometry, Rect, Scalar};
use crate::relations::Partition;
use crate::truncation::{AtomId, Depth, PieceId, PieceOrigin, TruncatedCompactum};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("symbolic action leaves the truncated parameter domain at piece {piece}; no codomain piece declared")]
    DepthMismatch { piece: String },
    #[error("image of piece {piece} is not contained in any declared piece")]
    NotFullyInvariant { piece: String },
    #[error("codomain piece {piece} has no preimage piece")]
    MissingPreimage { piece: String },
    #[error("image of atom {atom} not covered by codomain atoms")]
    ImageUnresolved { atom: AtomId },
    #[error("partition is not equivariant under the map")]
    NotEquivariant,
}

/// Axis-aligned affine map; the only kind the geometry supports.
#[derive(Debug, Clone, Serialize)]
pub struct AxisAffine {
    pub m00: Scalar,
    pub m01: Scalar,
    pub m10: Scalar,
    pub m11: Scalar,
    pub tx: Scalar,
    pub ty: Scalar,
}

impl AxisAffine {
    pub fn identity() -> Self {
        AxisAffine {
            m00: Scalar::one(),
            m01: Scalar::zero(),
            m10: Scalar::zero(),
            m11: Scalar::one(),
            tx: Scalar::zero(),
            ty: Scalar::zero(),
        }
    }

    /// The unique diagonal affine carrying bbox `a` onto bbox `b`
    /// orientation-preservingly; degenerate axes translate.
    pub fn between_bboxes(a: &Rect, b: &Rect) -> Self {
        let sx = if a.width().is_zero() {
            Scalar::one()
        } else {
            &b.width() / &a.width()
        };
        let sy = if a.height().is_zero() {
            Scalar::one()
        } else {
            &b.height() / &a.height()
        };
        AxisAffine {
            tx: &b.x0 - &(&sx * &a.x0),
            ty: &b.y0 - &(&sy * &a.y0),
            m00: sx,
            m01: Scalar::zero(),
            m10: Scalar::zero(),
            m11: sy,
        }
    }

    pub fn apply_point(&self, x: &Scalar, y: &Scalar) -> (Scalar, Scalar) {
        (
            &(&(&self.m00 * x) + &(&self.m01 * y)) + &self.tx,
            &(&(&self.m10 * x) + &(&self.m11 * y)) + &self.ty,
        )
    }

    pub fn apply_rect(&self, r: &Rect) -> Rect {
        let (x0, y0) = self.apply_point(&r.x0, &r.y0);
        let (x1, y1) = self.apply_point(&r.x1, &r.y1);
        Rect::new(x0, x1, y0, y1)
    }

    pub fn apply_geometry(&self, g: &PieceGeometry) -> PieceGeometry {
        PieceGeometry::from_parts_unchecked(g.parts().iter().map(|r| self.apply_rect(r)).collect())
    }
}

/// A symbolic self-map bound to a domain truncation and a codomain
/// truncation (possibly at shallower word depth), with the piece-image
/// table and the atom-level image correspondence.
pub struct DynamicalSystem<'a> {
    pub dom: &'a TruncatedCompactum,
    pub cod: &'a TruncatedCompactum,
    pub map: MapSpec,
    /// Domain piece -> codomain piece containing its image.
    pub piece_image: Vec<PieceId>,
    /// Per domain piece, the affine realizing the action on it.
    pub piece_affine: Vec<AxisAffine>,
    /// Domain atom -> codomain atoms substantially covering its image.
    pub atom_images: Vec<Vec<AtomId>>,
    /// Geometry of each atom's image.
    pub image_rects: Vec<Rect>,
}

/// The codomain depth a map requires: word depth drops by one per shift.
pub fn codomain_depth(map: &MapSpec, depth: Depth) -> Result<Depth, DynamicsError> {
    let has_shift = map.actions.iter().any(|(_, a)| matches!(a, MapAction::Shift));
    if !has_shift {
        return Ok(depth);
    }
    if depth.words < 2 {
        return Err(DynamicsError::DepthMismatch {
            piece: "word family".into(),
        });
    }
    Ok(Depth::new(depth.ints, depth.dyadics, depth.words - 1))
}

pub fn build_system<'a>(
    map: &MapSpec,
    dom: &'a TruncatedCompactum,
    cod: &'a TruncatedCompactum,
) -> Result<DynamicalSystem<'a>, DynamicsError> {
    let mut piece_image = Vec::with_capacity(dom.pieces.len());
    let mut piece_affine = Vec::with_capacity(dom.pieces.len());
    for piece in &dom.pieces {
        let label = piece.origin.label();
        let action = match &piece.origin {
            PieceOrigin::Continuum(name) => map.action_for(name),
            PieceOrigin::Member { family, .. } => map.action_for(family),
        };
        let (target, affine) = match (&piece.origin, action) {
            (PieceOrigin::Member { family, param }, MapAction::Shift) => {
                let ParamValue::Word(w) = param else {
                    return Err(DynamicsError::DepthMismatch { piece: label });
                };
                let shifted = ParamValue::Word(w.chars().skip(1).collect());
                let target = cod
                    .family_members(family)
                    .into_iter()
                    .find(|(q, _)| **q == shifted)
                    .map(|(_, pid)| pid)
                    .ok_or(DynamicsError::DepthMismatch { piece: label.clone() })?;
                let affine = AxisAffine::between_bboxes(
                    &piece.geometry.bbox(),
                    &cod.piece(target).geometry.bbox(),
                );
                (target, affine)
            }
            (_, MapAction::Identity) => {
                let target = cod
                    .piece_by_label(&label)
                    .map(|p| p.id)
                    .ok_or(DynamicsError::DepthMismatch { piece: label.clone() })?;
                (target, AxisAffine::identity())
            }
            (_, MapAction::Affine { m00, m01, m10, m11, tx, ty }) => {
                let affine = AxisAffine { m00, m01, m10, m11, tx, ty };
                let image = affine.apply_geometry(&piece.geometry);
                let target = cod
                    .pieces
                    .iter()
                    .find(|p| image.parts().iter().all(|r| p.geometry.covers_rect(r)))
                    .map(|p| p.id)
                    .ok_or(DynamicsError::NotFullyInvariant { piece: label.clone() })?;
                (target, affine)
            }
            (PieceOrigin::Continuum(_), MapAction::Shift) => {
                return Err(DynamicsError::DepthMismatch { piece: label })
            }
        };
        piece_image.push(target);
        piece_affine.push(affine);
    }

    // Full invariance: the declared pieces map onto the codomain pieces.
    let hit: BTreeSet<PieceId> = piece_image.iter().copied().collect();
    for p in &cod.pieces {
        if !hit.contains(&p.id) {
            return Err(DynamicsError::MissingPreimage {
                piece: p.origin.label(),
            });
        }
    }

    // Atom-level correspondence.
    let mut atom_images = Vec::with_capacity(dom.atoms.len());
    let mut image_rects = Vec::with_capacity(dom.atoms.len());
    for atom in &dom.atoms {
        let affine = &piece_affine[atom.piece as usize];
        let image = affine.apply_rect(&atom.rect);
        let target_piece = piece_image[atom.piece as usize];
        let mut covering: Vec<AtomId> = Vec::new();
        let mut overlaps: Vec<Rect> = Vec::new();
        for &b in &cod.piece_atoms[target_piece as usize] {
            let brect = &cod.atom(b).rect;
            if let Some(overlap) = brect.intersection(&image) {
                if substantial(&overlap, &image) {
                    covering.push(b);
                    overlaps.push(overlap);
                }
            }
        }
        if covering.is_empty() || !rect_covered_by(&image, &overlaps) {
            return Err(DynamicsError::ImageUnresolved { atom: atom.id });
        }
        atom_images.push(covering);
        image_rects.push(image);
    }

    Ok(DynamicalSystem {
        dom,
        cod,
        map: map.clone(),
        piece_image,
        piece_affine,
        atom_images,
        image_rects,
    })
}

/// An overlap is substantial when it matches the image's dimension: full
/// cells for boxes, positive length for segments, containment for points.
fn substantial(overlap: &Rect, image: &Rect) -> bool {
    let dim = |r: &Rect| (!r.width().is_zero()) as u8 + (!r.height().is_zero()) as u8;
    dim(overlap) == dim(image)
}

// ---------------------------------------------------------------------------
// Equivariance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct IntoViolation {
    pub class: AtomId,
    /// Distinct codomain classes hit by the class's image.
    pub images: Vec<AtomId>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OntoViolation {
    pub class: AtomId,
    pub image_class: AtomId,
    pub uncovered_atom: AtomId,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivarianceReport {
    pub pass: bool,
    pub into_violations: Vec<IntoViolation>,
    pub onto_violations: Vec<OntoViolation>,
}

/// Classes must map into a single codomain class and onto it: the image
/// class's atoms are exactly covered by the class's image.
pub fn verify_equivariance(
    s: &DynamicalSystem,
    p_dom: &Partition,
    p_cod: &Partition,
) -> EquivarianceReport {
    assert_eq!(p_dom.n_atoms(), s.dom.atoms.len());
    assert_eq!(p_cod.n_atoms(), s.cod.atoms.len());
    let mut into_violations = Vec::new();
    let mut onto_violations = Vec::new();
    for (rep, info) in p_dom.classes() {
        let mut images: BTreeSet<AtomId> = BTreeSet::new();
        for &a in &info.atoms {
            for &b in &s.atom_images[a as usize] {
                images.insert(p_cod.rep(b));
            }
        }
        if images.len() != 1 {
            into_violations.push(IntoViolation {
                class: rep,
                images: images.into_iter().collect(),
            });
            continue;
        }
        let image_class = *images.iter().next().unwrap();
        // Onto: every atom of the image class is covered by this class's
        // image geometry.
        let image_parts: Vec<Rect> = info
            .atoms
            .iter()
            .map(|&a| s.image_rects[a as usize].clone())
            .collect();
        for &b in &p_cod.class(image_class).atoms {
            let brect = &s.cod.atom(b).rect;
            let overlaps: Vec<Rect> = image_parts
                .iter()
                .filter_map(|r| r.intersection(brect))
                .filter(|o| substantial(o, brect))
                .collect();
            if !rect_covered_by(brect, &overlaps) {
                onto_violations.push(OntoViolation {
                    class: rep,
                    image_class,
                    uncovered_atom: b,
                });
                break;
            }
        }
    }
    EquivarianceReport {
        pass: into_violations.is_empty() && onto_violations.is_empty(),
        into_violations,
        onto_violations,
    }
}

/// The induced map on quotient classes.
#[derive(Debug, Clone, Serialize)]
pub struct InducedMap {
    /// Domain class representative -> codomain class representative.
    pub table: BTreeMap<AtomId, AtomId>,
}

impl InducedMap {
    pub fn to_json(&self) -> serde_json::Value {
        let table: BTreeMap<String, AtomId> = self
            .table
            .iter()
            .map(|(k, v)| (format!("{k:06}"), *v))
            .collect();
        serde_json::json!({ "classes": table })
    }
}

/// Requires equivariance; the class-to-class table then satisfies
/// projection ∘ f = induced ∘ projection on every atom.
pub fn induced_map(
    s: &DynamicalSystem,
    p_dom: &Partition,
    p_cod: &Partition,
) -> Result<InducedMap, DynamicsError> {
    let report = verify_equivariance(s, p_dom, p_cod);
    if !report.pass {
        return Err(DynamicsError::NotEquivariant);
    }
    let mut table = BTreeMap::new();
    for (rep, info) in p_dom.classes() {
        let a = info.atoms[0];
        let b = s.atom_images[a as usize][0];
        table.insert(rep, p_cod.rep(b));
    }
    Ok(InducedMap { table })
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub atom: AtomId,
    pub dom_class: AtomId,
    pub expected: AtomId,
    pub actual: Vec<AtomId>,
}

/// Checks class(f(a)) = induced(class(a)) on the sample atoms (all atoms by
/// default); returns the first counterexample.
pub fn verify_semiconjugacy(
    s: &DynamicalSystem,
    p_dom: &Partition,
    p_cod: &Partition,
    im: &InducedMap,
    samples: Option<&[AtomId]>,
) -> Result<(), Counterexample> {
    let all: Vec<AtomId>;
    let atoms = match samples {
        Some(list) => list,
        None => {
            all = (0..s.dom.atoms.len() as u32).collect();
            &all
        }
    };
    for &a in atoms {
        let dom_class = p_dom.rep(a);
        let expected = im.table[&dom_class];
        let mut actual: Vec<AtomId> = s.atom_images[a as usize]
            .iter()
            .map(|&b| p_cod.rep(b))
            .collect();
        actual.sort_unstable();
        actual.dedup();
        if actual != [expected] {
            return Err(Counterexample {
                atom: a,
                dom_class,
                expected,
                actual,
            });
        }
    }
    Ok(())
}
