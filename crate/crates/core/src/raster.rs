//! Grid rasterization of truncations, complement flood fill, unshieldedness
//! at resolution δ, and topological hulls.
//!
//! The complement is flooded with 4-connectivity and boundary adjacency is
//! tested with 8-connectivity, the standard pairing that avoids raster
//! connectivity paradoxes. The grid is offset by half a cell so geometry
//! coordinates do not sit on cell boundaries for the usual dyadic inputs.

use serde::Serialize;

use crate::geometry::{Point, Rect, Scalar};
use crate::truncation::{AtomId, TruncatedCompactum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellLabel {
    Set,
    BoundedComplement,
    UnboundedComplement,
}

#[derive(Debug, Clone, Serialize)]
pub struct RasterDecomposition {
    pub delta: Scalar,
    /// Lower-left corner of cell (0, 0).
    pub origin: Point,
    pub cols: usize,
    pub rows: usize,
    /// Row-major from the bottom row.
    pub labels: Vec<CellLabel>,
}

impl RasterDecomposition {
    fn idx(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    pub fn label(&self, col: usize, row: usize) -> CellLabel {
        self.labels[self.idx(col, row)]
    }

    pub fn cell_rect(&self, col: usize, row: usize) -> Rect {
        let x0 = &self.origin.x + &(&self.delta * &Scalar::int(col as i64));
        let y0 = &self.origin.y + &(&self.delta * &Scalar::int(row as i64));
        Rect::new(x0.clone(), &x0 + &self.delta, y0.clone(), &y0 + &self.delta)
    }

    /// Cell containing the point; boundary points resolve to the upper cell.
    pub fn cell_containing(&self, p: &Point) -> Option<(usize, usize)> {
        let fx = (&p.x - &self.origin.x) / self.delta.clone();
        let fy = (&p.y - &self.origin.y) / self.delta.clone();
        use num_traits::ToPrimitive;
        let col = fx.floor_int().to_usize()?;
        let row = fy.floor_int().to_usize()?;
        (col < self.cols && row < self.rows).then_some((col, row))
    }

    /// True iff the cell is 8-adjacent to the unbounded complement.
    pub fn exposed(&self, col: usize, row: usize) -> bool {
        self.neighbors8(col, row)
            .any(|(c, r)| self.label(c, r) == CellLabel::UnboundedComplement)
    }

    /// PGM (P2) export; SET = 0, BOUNDED_COMPLEMENT = 1, UNBOUNDED_COMPLEMENT = 2.
    /// Rows are written top-down as images expect.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n2\n", self.cols, self.rows);
        for row in (0..self.rows).rev() {
            let mut line = String::with_capacity(self.cols * 2);
            for col in 0..self.cols {
                if col > 0 {
                    line.push(' ');
                }
                line.push(match self.label(col, row) {
                    CellLabel::Set => '0',
                    CellLabel::BoundedComplement => '1',
                    CellLabel::UnboundedComplement => '2',
                });
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    fn neighbors8(&self, col: usize, row: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols as isize;
        let rows = self.rows as isize;
        let (c, r) = (col as isize, row as isize);
        (-1isize..=1)
            .flat_map(move |dr| (-1isize..=1).map(move |dc| (c + dc, r + dr)))
            .filter(move |&(nc, nr)| {
                (nc, nr) != (c, r) && nc >= 0 && nr >= 0 && nc < cols && nr < rows
            })
            .map(|(nc, nr)| (nc as usize, nr as usize))
    }
}

/// Rasterizes the given rects: cells touching any rect are SET, the rest of
/// the complement is flooded from the frame.
pub fn rasterize(parts: &[Rect], delta: &Scalar) -> RasterDecomposition {
    assert!(!parts.is_empty());
    assert!(delta.is_positive());
    let mut bbox = parts[0].clone();
    for p in &parts[1..] {
        bbox = bbox.union_bbox(p);
    }
    // Half-offset origin two cells out; the outer frame ring stays clear of
    // the geometry.
    let margin = delta * &Scalar::ratio(3, 2);
    let origin = Point::new(&bbox.x0 - &margin, &bbox.y0 - &margin);
    let span_x = &(&bbox.x1 - &origin.x) + &margin;
    let span_y = &(&bbox.y1 - &origin.y) + &margin;
    let cols = span_x.ceil_div(delta);
    let rows = span_y.ceil_div(delta);

    let mut labels = vec![CellLabel::UnboundedComplement; cols * rows];
    let mut raster = RasterDecomposition {
        delta: delta.clone(),
        origin,
        cols,
        rows,
        labels: Vec::new(),
    };

    for part in parts {
        let (c0, c1) = cell_range(&raster.origin.x, delta, &part.x0, &part.x1, cols);
        let (r0, r1) = cell_range(&raster.origin.y, delta, &part.y0, &part.y1, rows);
        for row in r0..=r1 {
            for col in c0..=c1 {
                labels[row * cols + col] = CellLabel::Set;
            }
        }
    }

    // Flood 4-connected complement from the frame; what the flood cannot
    // reach is bounded.
    let mut reached = vec![false; cols * rows];
    let mut queue: Vec<(usize, usize)> = Vec::new();
    for col in 0..cols {
        for row in [0, rows - 1] {
            if labels[row * cols + col] != CellLabel::Set && !reached[row * cols + col] {
                reached[row * cols + col] = true;
                queue.push((col, row));
            }
        }
    }
    for row in 0..rows {
        for col in [0, cols - 1] {
            if labels[row * cols + col] != CellLabel::Set && !reached[row * cols + col] {
                reached[row * cols + col] = true;
                queue.push((col, row));
            }
        }
    }
    while let Some((col, row)) = queue.pop() {
        let push = |c: isize, r: isize, queue: &mut Vec<(usize, usize)>, reached: &mut Vec<bool>| {
            if c < 0 || r < 0 || c >= cols as isize || r >= rows as isize {
                return;
            }
            let (c, r) = (c as usize, r as usize);
            let i = r * cols + c;
            if labels[i] != CellLabel::Set && !reached[i] {
                reached[i] = true;
                queue.push((c, r));
            }
        };
        push(col as isize - 1, row as isize, &mut queue, &mut reached);
        push(col as isize + 1, row as isize, &mut queue, &mut reached);
        push(col as isize, row as isize - 1, &mut queue, &mut reached);
        push(col as isize, row as isize + 1, &mut queue, &mut reached);
    }
    for i in 0..labels.len() {
        if labels[i] != CellLabel::Set {
            labels[i] = if reached[i] {
                CellLabel::UnboundedComplement
            } else {
                CellLabel::BoundedComplement
            };
        }
    }
    raster.labels = labels;
    raster
}

/// Inclusive cell index range whose closed cells meet [lo, hi].
fn cell_range(origin: &Scalar, delta: &Scalar, lo: &Scalar, hi: &Scalar, count: usize) -> (usize, usize) {
    let f0 = (lo - origin) / delta.clone();
    let f1 = (hi - origin) / delta.clone();
    let mut i0 = f0.floor_int();
    if f0.is_integer() {
        // The coordinate sits exactly on a boundary; the cell below touches.
        i0 -= 1;
    }
    let i1 = f1.floor_int();
    use num_traits::ToPrimitive;
    let clamp = |v: num_bigint::BigInt| -> usize {
        if v < num_bigint::BigInt::from(0) {
            0
        } else {
            let v = v.to_usize().unwrap_or(count - 1);
            v.min(count - 1)
        }
    };
    (clamp(i0), clamp(i1))
}

#[derive(Debug, Clone, Serialize)]
pub struct UnshieldedReport {
    pub unshielded: bool,
    /// First SET cell not 8-adjacent to the unbounded complement, if any.
    pub shielded_witness: Option<(usize, usize)>,
    /// Set when δ exceeds half the minimal positive gap between pieces.
    pub resolution_warning: bool,
    #[serde(skip)]
    pub raster: RasterDecomposition,
}

/// Rasterizes the truncation and decides unshieldedness at resolution δ:
/// true iff every SET cell is 8-adjacent to the unbounded complement.
pub fn check_unshielded(t: &TruncatedCompactum, delta: &Scalar) -> UnshieldedReport {
    let parts: Vec<Rect> = t
        .pieces
        .iter()
        .flat_map(|p| p.geometry.parts().iter().cloned())
        .collect();
    let raster = rasterize(&parts, delta);
    let resolution_warning = match t.min_feature_gap() {
        Some(gap) => delta > &gap.halved(),
        None => false,
    };
    let mut witness = None;
    'scan: for row in 0..raster.rows {
        for col in 0..raster.cols {
            if raster.label(col, row) != CellLabel::Set {
                continue;
            }
            let exposed = raster
                .neighbors8(col, row)
                .any(|(c, r)| raster.label(c, r) == CellLabel::UnboundedComplement);
            if !exposed {
                witness = Some((col, row));
                break 'scan;
            }
        }
    }
    UnshieldedReport {
        unshielded: witness.is_none(),
        shielded_witness: witness,
        resolution_warning,
        raster,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HullResult {
    /// Cells of the atom set together with the bounded complementary cells it
    /// encloses, sorted (col, row).
    pub cells: Vec<(usize, usize)>,
    #[serde(skip)]
    pub raster: RasterDecomposition,
}

/// Topological hull of an atom set at resolution δ: its own cells plus every
/// bounded complementary cell enclosed by it.
pub fn raster_hull(t: &TruncatedCompactum, atoms: &[AtomId], delta: &Scalar) -> HullResult {
    assert!(!atoms.is_empty(), "hull of an empty atom set");
    assert!(
        t.atom_set_connected(atoms),
        "hull input must be a connected atom set"
    );
    let parts: Vec<Rect> = atoms.iter().map(|&a| t.atom(a).rect.clone()).collect();
    let raster = rasterize(&parts, delta);
    let mut cells = Vec::new();
    for row in 0..raster.rows {
        for col in 0..raster.cols {
            match raster.label(col, row) {
                CellLabel::Set | CellLabel::BoundedComplement => cells.push((col, row)),
                CellLabel::UnboundedComplement => {}
            }
        }
    }
    cells.sort_unstable();
    HullResult { cells, raster }
}

/// Geometry of a set of hull cells, for re-rasterization in idempotence
/// checks.
pub fn cells_geometry(raster: &RasterDecomposition, cells: &[(usize, usize)]) -> Vec<Rect> {
    cells
        .iter()
        .map(|&(c, r)| raster.cell_rect(c, r))
        .collect()
}
