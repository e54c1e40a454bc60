//! Exact rational planar primitives: scalars, axis-aligned parts, set and
//! Hausdorff distances in the L∞ metric, connectivity and subdivision.
//!
//! Everything here is exact: coordinates are arbitrary-precision rationals
//! and no operation ever rounds. All metric notions use the L∞ (Chebyshev)
//! distance so that distances between rational geometries stay rational.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("marker ({0}, {1}) does not lie on the geometry")]
    MarkerOffGeometry(String, String),
    #[error("segment endpoints must share an axis: ({0}, {1}) -- ({2}, {3})")]
    SkewSegment(String, String, String, String),
    #[error("piece geometry must have at least one part")]
    EmptyGeometry,
    #[error("piece geometry is not connected")]
    DisconnectedGeometry,
}

/// Exact rational scalar. Always stored reduced with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scalar(BigRational);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Scalar(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num/den`; panics on a zero denominator (callers pass literals).
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// 2^(-n)
    pub fn pow2_neg(n: u32) -> Self {
        Scalar(BigRational::new(BigInt::one(), BigInt::one() << n))
    }

    /// 3^(-n)
    pub fn pow3_neg(n: u32) -> Self {
        Scalar(BigRational::new(BigInt::one(), BigInt::from(3u8).pow(n)))
    }

    pub fn from_big(r: BigRational) -> Self {
        Scalar(r)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Scalar(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn halved(&self) -> Self {
        Scalar(&self.0 / BigRational::from_integer(BigInt::from(2)))
    }

    /// Smallest integer n with n*other >= self (both positive).
    pub fn ceil_div(&self, other: &Scalar) -> usize {
        assert!(other.is_positive());
        let q = &self.0 / &other.0;
        let c = q.ceil().to_integer();
        c.to_usize().expect("subdivision count out of range")
    }

    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Approximate value for rendering only; never used in computations.
    pub fn to_f64_lossy(&self) -> f64 {
        self.0.to_f64().unwrap_or(0.0)
    }

    /// Parses "p", "-p", "p/q".
    pub fn parse(text: &str) -> Result<Self, String> {
        let t = text.trim();
        let (num, den) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let n: BigInt = num
            .parse()
            .map_err(|_| format!("invalid rational numerator: {num:?}"))?;
        let d: BigInt = den
            .parse()
            .map_err(|_| format!("invalid rational denominator: {den:?}"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(Scalar(BigRational::new(n, d)))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Scalar::parse(&s).map_err(serde::de::Error::custom)
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar((&self.0).$method(&rhs.0))
            }
        }
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar(self.0.$method(&rhs.0))
            }
        }
    };
}

scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);
scalar_binop!(Div, div);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-&self.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

/// A point with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: Scalar,
    pub y: Scalar,
}

impl Point {
    pub fn new(x: Scalar, y: Scalar) -> Self {
        Point { x, y }
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A closed axis-aligned rectangle, possibly degenerate along one or both
/// axes. Segments and points are degenerate rects, which keeps every
/// geometric primitive uniform.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: Scalar,
    pub x1: Scalar,
    pub y0: Scalar,
    pub y1: Scalar,
}

impl fmt::Debug for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{}]x[{},{}]",
            self.x0, self.x1, self.y0, self.y1
        )
    }
}

impl Rect {
    pub fn new(x0: Scalar, x1: Scalar, y0: Scalar, y1: Scalar) -> Self {
        let (x0, x1) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let (y0, y1) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        Rect { x0, x1, y0, y1 }
    }

    pub fn point(p: &Point) -> Self {
        Rect::new(p.x.clone(), p.x.clone(), p.y.clone(), p.y.clone())
    }

    /// Axis-aligned segment; rejects skew endpoints.
    pub fn seg(p: &Point, q: &Point) -> Result<Self, GeometryError> {
        if p.x != q.x && p.y != q.y {
            return Err(GeometryError::SkewSegment(
                p.x.to_string(),
                p.y.to_string(),
                q.x.to_string(),
                q.y.to_string(),
            ));
        }
        Ok(Rect::new(p.x.clone(), q.x.clone(), p.y.clone(), q.y.clone()))
    }

    pub fn bbox(p: &Point, q: &Point) -> Self {
        Rect::new(p.x.clone(), q.x.clone(), p.y.clone(), q.y.clone())
    }

    pub fn width(&self) -> Scalar {
        &self.x1 - &self.x0
    }

    pub fn height(&self) -> Scalar {
        &self.y1 - &self.y0
    }

    /// L∞ diameter.
    pub fn diameter(&self) -> Scalar {
        self.width().max(self.height())
    }

    pub fn is_point(&self) -> bool {
        self.x0 == self.x1 && self.y0 == self.y1
    }

    pub fn is_degenerate(&self) -> bool {
        self.x0 == self.x1 || self.y0 == self.y1
    }

    fn axis_gap(lo_a: &Scalar, hi_a: &Scalar, lo_b: &Scalar, hi_b: &Scalar) -> Scalar {
        let g1 = lo_b - hi_a;
        let g2 = lo_a - hi_b;
        g1.max(g2).max(Scalar::zero())
    }

    /// Minimal L∞ distance between the two closed rects; 0 iff they meet.
    pub fn distance(&self, other: &Rect) -> Scalar {
        let gx = Rect::axis_gap(&self.x0, &self.x1, &other.x0, &other.x1);
        let gy = Rect::axis_gap(&self.y0, &self.y1, &other.y0, &other.y1);
        gx.max(gy)
    }

    pub fn touches(&self, other: &Rect) -> bool {
        self.distance(other).is_zero()
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x0.clone().max(other.x0.clone());
        let x1 = self.x1.clone().min(other.x1.clone());
        let y0 = self.y0.clone().max(other.y0.clone());
        let y1 = self.y1.clone().min(other.y1.clone());
        if x0 <= x1 && y0 <= y1 {
            Some(Rect { x0, x1, y0, y1 })
        } else {
            None
        }
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    pub fn corners(&self) -> Vec<Point> {
        let mut out = vec![Point::new(self.x0.clone(), self.y0.clone())];
        for p in [
            Point::new(self.x1.clone(), self.y0.clone()),
            Point::new(self.x0.clone(), self.y1.clone()),
            Point::new(self.x1.clone(), self.y1.clone()),
        ] {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// L∞ distance from a point to this rect.
    pub fn distance_to_point(&self, p: &Point) -> Scalar {
        let dx = Rect::axis_gap(&self.x0, &self.x1, &p.x, &p.x);
        let dy = Rect::axis_gap(&self.y0, &self.y1, &p.y, &p.y);
        dx.max(dy)
    }

    pub fn union_bbox(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.clone().min(other.x0.clone()),
            x1: self.x1.clone().max(other.x1.clone()),
            y0: self.y0.clone().min(other.y0.clone()),
            y1: self.y1.clone().max(other.y1.clone()),
        }
    }
}

/// Finite union of closed axis-aligned parts forming one connected set.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PieceGeometry {
    parts: Vec<Rect>,
}

impl fmt::Debug for PieceGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PieceGeometry{:?}", self.parts)
    }
}

impl PieceGeometry {
    pub fn new(parts: Vec<Rect>) -> Result<Self, GeometryError> {
        if parts.is_empty() {
            return Err(GeometryError::EmptyGeometry);
        }
        if !is_connected(&parts) {
            return Err(GeometryError::DisconnectedGeometry);
        }
        Ok(PieceGeometry { parts })
    }

    /// For internal composites (class geometries) that may be built from
    /// already-validated connected atom sets.
    pub fn from_parts_unchecked(parts: Vec<Rect>) -> Self {
        PieceGeometry { parts }
    }

    pub fn single(rect: Rect) -> Self {
        PieceGeometry { parts: vec![rect] }
    }

    pub fn parts(&self) -> &[Rect] {
        &self.parts
    }

    pub fn bbox(&self) -> Rect {
        let mut b = self.parts[0].clone();
        for p in &self.parts[1..] {
            b = b.union_bbox(p);
        }
        b
    }

    pub fn diameter(&self) -> Scalar {
        self.bbox().diameter()
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.parts.iter().any(|r| r.contains_point(p))
    }

    pub fn distance(&self, other: &PieceGeometry) -> Scalar {
        let mut best: Option<Scalar> = None;
        for a in &self.parts {
            for b in &other.parts {
                let d = a.distance(b);
                if d.is_zero() {
                    return Scalar::zero();
                }
                best = Some(match best {
                    None => d,
                    Some(cur) => cur.min(d),
                });
            }
        }
        best.expect("non-empty geometries")
    }

    pub fn touches(&self, other: &PieceGeometry) -> bool {
        self.distance(other).is_zero()
    }

    pub fn touches_rect(&self, rect: &Rect) -> bool {
        self.parts.iter().any(|p| p.touches(rect))
    }

    /// Exact test: is `rect` contained in the union of this geometry's parts?
    pub fn covers_rect(&self, rect: &Rect) -> bool {
        rect_covered_by(rect, &self.parts)
    }
}

/// Minimal L∞ distance between two closed sets.
pub fn set_distance(a: &PieceGeometry, b: &PieceGeometry) -> Scalar {
    a.distance(b)
}

/// L∞ diameter (bounding-box extent; exact for any closed set).
pub fn diameter(a: &PieceGeometry) -> Scalar {
    a.diameter()
}

/// True iff the intersection graph of `parts` (edge = the closed parts meet)
/// is connected.
pub fn is_connected(parts: &[Rect]) -> bool {
    if parts.is_empty() {
        return false;
    }
    let n = parts.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && parts[i].touches(&parts[j]) {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// Exact cover test: `rect ⊆ ⋃ parts`. The rect is cut along every part
/// boundary crossing it; each resulting cell must lie inside some part.
pub fn rect_covered_by(rect: &Rect, parts: &[Rect]) -> bool {
    if parts.iter().any(|p| p.contains_rect(rect)) {
        return true;
    }
    let mut xs = vec![rect.x0.clone(), rect.x1.clone()];
    let mut ys = vec![rect.y0.clone(), rect.y1.clone()];
    for p in parts {
        for v in [&p.x0, &p.x1] {
            if *v > rect.x0 && *v < rect.x1 {
                xs.push(v.clone());
            }
        }
        for v in [&p.y0, &p.y1] {
            if *v > rect.y0 && *v < rect.y1 {
                ys.push(v.clone());
            }
        }
    }
    xs.sort();
    xs.dedup();
    ys.sort();
    ys.dedup();
    for xi in 0..xs.len() - 1 {
        for yi in 0..ys.len() - 1 {
            let cell = Rect {
                x0: xs[xi].clone(),
                x1: xs[xi + 1].clone(),
                y0: ys[yi].clone(),
                y1: ys[yi + 1].clone(),
            };
            if !parts.iter().any(|p| p.contains_rect(&cell)) {
                return false;
            }
        }
    }
    // Degenerate rects collapse one loop to zero iterations; handle the
    // segment/point cases by checking the 1-d cells explicitly.
    if rect.x0 == rect.x1 && rect.y0 != rect.y1 {
        for yi in 0..ys.len() - 1 {
            let cell = Rect {
                x0: rect.x0.clone(),
                x1: rect.x0.clone(),
                y0: ys[yi].clone(),
                y1: ys[yi + 1].clone(),
            };
            if !parts.iter().any(|p| p.contains_rect(&cell)) {
                return false;
            }
        }
    }
    if rect.y0 == rect.y1 && rect.x0 != rect.x1 {
        for xi in 0..xs.len() - 1 {
            let cell = Rect {
                x0: xs[xi].clone(),
                x1: xs[xi + 1].clone(),
                y0: rect.y0.clone(),
                y1: rect.y0.clone(),
            };
            if !parts.iter().any(|p| p.contains_rect(&cell)) {
                return false;
            }
        }
    }
    if rect.is_point() {
        return parts.iter().any(|p| p.contains_rect(rect));
    }
    true
}

// ---------------------------------------------------------------------------
// Hausdorff distance
// ---------------------------------------------------------------------------

/// A line a*x + b*y = c with small integer normal, used for the exact
/// candidate-point arrangement in the multi-part Hausdorff computation.
#[derive(Clone, PartialEq, Eq)]
struct Line {
    a: i8,
    b: i8,
    c: Scalar,
}

impl Line {
    fn intersect(&self, other: &Line) -> Option<Point> {
        let det = i32::from(self.a) * i32::from(other.b) - i32::from(self.b) * i32::from(other.a);
        if det == 0 {
            return None;
        }
        let det = Scalar::int(det as i64);
        let x = (&self.c * &Scalar::int(other.b as i64) - &other.c * &Scalar::int(self.b as i64))
            / det.clone();
        let y = (&other.c * &Scalar::int(self.a as i64) - &self.c * &Scalar::int(other.a as i64))
            / det;
        Some(Point::new(x, y))
    }
}

fn min_distance_to_parts(p: &Point, parts: &[Rect]) -> Scalar {
    let mut best = parts[0].distance_to_point(p);
    for r in &parts[1..] {
        let d = r.distance_to_point(p);
        if d < best {
            best = d;
        }
        if best.is_zero() {
            break;
        }
    }
    best
}

/// Breaklines of the L∞ distance field of one rect: its four edge lines plus
/// the eight diagonals through its corners.
fn breaklines(r: &Rect) -> Vec<Line> {
    let mut out = Vec::with_capacity(12);
    for v in [&r.x0, &r.x1] {
        out.push(Line { a: 1, b: 0, c: v.clone() });
    }
    for v in [&r.y0, &r.y1] {
        out.push(Line { a: 0, b: 1, c: v.clone() });
    }
    for corner in r.corners() {
        out.push(Line { a: 1, b: -1, c: &corner.x - &corner.y });
        out.push(Line { a: 1, b: 1, c: &corner.x + &corner.y });
    }
    out
}

/// Ridge lines where the distance fields of two rects can agree. Each field
/// is piecewise of the form ±x + cx, ±y + cy with cx, cy drawn from the rect
/// coordinates; equating any two such forms yields a line with normal entries
/// in {0, ±1, ±2}.
fn ridge_lines(r1: &Rect, r2: &Rect) -> Vec<Line> {
    let forms = |r: &Rect| -> Vec<(i8, i8, Scalar)> {
        vec![
            (-1, 0, r.x0.clone()), // x0 - x
            (1, 0, -&r.x1),        // x - x1
            (0, -1, r.y0.clone()),
            (0, 1, -&r.y1),
        ]
    };
    let mut out = Vec::new();
    for (a1, b1, c1) in forms(r1) {
        for (a2, b2, c2) in forms(r2) {
            let a = a1 - a2;
            let b = b1 - b2;
            if a == 0 && b == 0 {
                continue;
            }
            // (a1 x + b1 y + c1) = (a2 x + b2 y + c2)
            out.push(Line { a, b, c: &c2 - &c1 });
        }
    }
    out
}

fn clip_to_rect(p: &Point, r: &Rect) -> bool {
    r.contains_point(p)
}

/// Directed Hausdorff distance sup_{x in a} d(x, b), exact.
fn directed_hausdorff(a: &PieceGeometry, b: &PieceGeometry) -> Scalar {
    let bparts = b.parts();
    let mut best = Scalar::zero();
    for part in a.parts() {
        let local = if bparts.len() == 1 {
            // Distance to a single rect is convex, so the sup over a rect is
            // attained at a corner.
            let mut m = Scalar::zero();
            for c in part.corners() {
                let d = bparts[0].distance_to_point(&c);
                if d > m {
                    m = d;
                }
            }
            m
        } else {
            let mut lines: Vec<Line> = Vec::new();
            for r in bparts {
                lines.extend(breaklines(r));
            }
            for i in 0..bparts.len() {
                for j in i + 1..bparts.len() {
                    lines.extend(ridge_lines(&bparts[i], &bparts[j]));
                }
            }
            // Edges of the queried part participate as constraint lines too.
            lines.push(Line { a: 1, b: 0, c: part.x0.clone() });
            lines.push(Line { a: 1, b: 0, c: part.x1.clone() });
            lines.push(Line { a: 0, b: 1, c: part.y0.clone() });
            lines.push(Line { a: 0, b: 1, c: part.y1.clone() });

            let mut candidates: Vec<Point> = part.corners();
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    if let Some(p) = lines[i].intersect(&lines[j]) {
                        if clip_to_rect(&p, part) {
                            candidates.push(p);
                        }
                    }
                }
            }
            let mut m = Scalar::zero();
            for c in &candidates {
                let d = min_distance_to_parts(c, bparts);
                if d > m {
                    m = d;
                }
            }
            m
        };
        if local > best {
            best = local;
        }
    }
    best
}

/// Symmetric L∞ Hausdorff distance between two closed sets.
pub fn hausdorff_distance(a: &PieceGeometry, b: &PieceGeometry) -> Scalar {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

// ---------------------------------------------------------------------------
// Subdivision
// ---------------------------------------------------------------------------

/// Splits `g` into closed cells of L∞ diameter ≤ δ, additionally cut at every
/// marker point. Cells tile each part exactly; cells of adjacent parts share
/// only boundary points.
pub fn subdivide(
    g: &PieceGeometry,
    delta: &Scalar,
    markers: &[Point],
) -> Result<Vec<Rect>, GeometryError> {
    assert!(delta.is_positive(), "subdivision granularity must be positive");
    for m in markers {
        if !g.contains_point(m) {
            return Err(GeometryError::MarkerOffGeometry(
                m.x.to_string(),
                m.y.to_string(),
            ));
        }
    }
    let mut out = Vec::new();
    for part in g.parts() {
        let xs = axis_cuts(&part.x0, &part.x1, markers.iter().map(|m| &m.x), delta);
        let ys = axis_cuts(&part.y0, &part.y1, markers.iter().map(|m| &m.y), delta);
        for xi in 0..xs.len() - 1 {
            for yi in 0..ys.len() - 1 {
                out.push(Rect {
                    x0: xs[xi].clone(),
                    x1: xs[xi + 1].clone(),
                    y0: ys[yi].clone(),
                    y1: ys[yi + 1].clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Cut positions on [lo, hi]: marker coordinates strictly inside, then each
/// span refined to lengths ≤ δ with equal rational steps. Returns at least
/// [lo, hi] (a single degenerate "span" when lo == hi).
fn axis_cuts<'a>(
    lo: &Scalar,
    hi: &Scalar,
    marks: impl Iterator<Item = &'a Scalar>,
    delta: &Scalar,
) -> Vec<Scalar> {
    if lo == hi {
        return vec![lo.clone(), hi.clone()];
    }
    let mut cuts: Vec<Scalar> = vec![lo.clone(), hi.clone()];
    for m in marks {
        if m > lo && m < hi {
            cuts.push(m.clone());
        }
    }
    cuts.sort();
    cuts.dedup();
    let mut refined = Vec::with_capacity(cuts.len());
    for i in 0..cuts.len() - 1 {
        let a = &cuts[i];
        let b = &cuts[i + 1];
        refined.push(a.clone());
        let len = b - a;
        let n = len.ceil_div(delta);
        if n > 1 {
            let step = len / Scalar::int(n as i64);
            let mut cur = a.clone();
            for _ in 1..n {
                cur = &cur + &step;
                refined.push(cur.clone());
            }
        }
    }
    refined.push(cuts.last().unwrap().clone());
    refined
}

/// Least common multiple of the denominators of the given scalars, used to
/// rescale a batch of exact rationals onto one integer grid.
pub fn common_denominator<'a>(values: impl Iterator<Item = &'a Scalar>) -> BigInt {
    let mut acc = BigInt::one();
    for v in values {
        acc = acc.lcm(v.denom());
    }
    acc
}

impl Scalar {
    /// self * den, which must be integral; the caller supplies a common
    /// denominator obtained from [`common_denominator`].
    pub fn scaled_int(&self, den: &BigInt) -> BigInt {
        let r = &self.0 * BigRational::from_integer(den.clone());
        debug_assert!(r.is_integer());
        r.to_integer()
    }
}

pub fn scalar_cmp(a: &Scalar, b: &Scalar) -> Ordering {
    a.cmp(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: i64, y: i64) -> Point {
        Point::new(Scalar::int(x), Scalar::int(y))
    }

    fn seg(x0: i64, y0: i64, x1: i64, y1: i64) -> Rect {
        Rect::seg(&pt(x0, y0), &pt(x1, y1)).unwrap()
    }

    fn geo(parts: Vec<Rect>) -> PieceGeometry {
        PieceGeometry::new(parts).unwrap()
    }

    #[test]
    fn set_distance_collinear_gap() {
        let a = geo(vec![seg(0, 0, 1, 0)]);
        let b = geo(vec![seg(2, 0, 3, 0)]);
        assert_eq!(set_distance(&a, &b), Scalar::int(1));
    }

    #[test]
    fn set_distance_shared_endpoint() {
        let a = geo(vec![seg(0, 0, 1, 0)]);
        let b = geo(vec![seg(1, 0, 1, 1)]);
        assert_eq!(set_distance(&a, &b), Scalar::zero());
    }

    #[test]
    fn set_distance_box_point() {
        let a = geo(vec![Rect::new(
            Scalar::zero(),
            Scalar::one(),
            Scalar::zero(),
            Scalar::one(),
        )]);
        let b = geo(vec![Rect::point(&pt(2, 1))]);
        assert_eq!(set_distance(&a, &b), Scalar::int(1));
    }

    #[test]
    fn hausdorff_parallel_translate() {
        let a = geo(vec![seg(0, 0, 1, 0)]);
        let b = geo(vec![Rect::seg(
            &Point::new(Scalar::zero(), Scalar::ratio(1, 2)),
            &Point::new(Scalar::one(), Scalar::ratio(1, 2)),
        )
        .unwrap()]);
        assert_eq!(hausdorff_distance(&a, &b), Scalar::ratio(1, 2));
    }

    #[test]
    fn hausdorff_identical_zero() {
        let a = geo(vec![seg(0, 0, 1, 0), seg(1, 0, 1, 1)]);
        assert_eq!(hausdorff_distance(&a, &a), Scalar::zero());
    }

    #[test]
    fn hausdorff_point_vs_segment() {
        let a = geo(vec![Rect::point(&pt(0, 0))]);
        let b = geo(vec![seg(0, 0, 1, 0)]);
        assert_eq!(hausdorff_distance(&a, &b), Scalar::int(1));
    }

    #[test]
    fn hausdorff_interior_optimum() {
        // Two points vs the segment joining them: the sup sits at the
        // midpoint, not at a vertex.
        let pts = PieceGeometry::from_parts_unchecked(vec![
            Rect::point(&pt(0, 0)),
            Rect::point(&pt(3, 0)),
        ]);
        let s = geo(vec![seg(0, 0, 3, 0)]);
        assert_eq!(hausdorff_distance(&s, &pts), Scalar::ratio(3, 2));
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(geo(vec![seg(0, 0, 1, 0)]).diameter(), Scalar::int(1));
        let b = geo(vec![Rect::new(
            Scalar::zero(),
            Scalar::one(),
            Scalar::zero(),
            Scalar::one(),
        )]);
        assert_eq!(b.diameter(), Scalar::int(1));
        assert_eq!(geo(vec![Rect::point(&pt(4, 5))]).diameter(), Scalar::zero());
    }

    #[test]
    fn connectivity_examples() {
        let shared = vec![
            seg(0, 0, 1, 0),
            Rect::seg(
                &Point::new(Scalar::ratio(1, 2), Scalar::zero()),
                &Point::new(Scalar::ratio(1, 2), Scalar::one()),
            )
            .unwrap(),
        ];
        assert!(is_connected(&shared));
        let apart = vec![
            Rect::new(Scalar::zero(), Scalar::one(), Scalar::zero(), Scalar::one()),
            Rect::new(Scalar::int(2), Scalar::int(3), Scalar::zero(), Scalar::one()),
        ];
        assert!(!is_connected(&apart));
        let chain = vec![seg(0, 0, 1, 0), seg(1, 0, 2, 0), seg(2, 0, 2, 1)];
        assert!(is_connected(&chain));
    }

    #[test]
    fn subdivide_splits_at_delta() {
        let g = geo(vec![seg(0, 0, 1, 0)]);
        let atoms = subdivide(&g, &Scalar::ratio(1, 2), &[]).unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].x1, Scalar::ratio(1, 2));
    }

    #[test]
    fn subdivide_single_when_delta_exceeds() {
        let g = geo(vec![seg(0, 0, 1, 0)]);
        let atoms = subdivide(&g, &Scalar::int(2), &[]).unwrap();
        assert_eq!(atoms.len(), 1);
    }

    #[test]
    fn subdivide_splits_at_marker() {
        let g = geo(vec![seg(0, 0, 1, 0)]);
        let marker = Point::new(Scalar::ratio(1, 4), Scalar::zero());
        let atoms = subdivide(&g, &Scalar::int(2), &[marker]).unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].x1, Scalar::ratio(1, 4));
    }

    #[test]
    fn subdivide_marker_off_geometry() {
        let g = geo(vec![seg(0, 0, 1, 0)]);
        let marker = pt(5, 5);
        assert!(matches!(
            subdivide(&g, &Scalar::one(), &[marker]),
            Err(GeometryError::MarkerOffGeometry(..))
        ));
    }

    #[test]
    fn subdivide_covers_exactly() {
        let g = geo(vec![Rect::new(
            Scalar::zero(),
            Scalar::one(),
            Scalar::zero(),
            Scalar::ratio(1, 2),
        )]);
        let atoms = subdivide(&g, &Scalar::ratio(1, 4), &[]).unwrap();
        for a in &atoms {
            assert!(g.covers_rect(a));
        }
        assert!(rect_covered_by(&g.parts()[0], &atoms));
    }

    #[test]
    fn scalar_parse_display_roundtrip() {
        for s in ["3", "-5", "1/2", "-7/8", "0"] {
            let v = Scalar::parse(s).unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert_eq!(Scalar::parse("2/4").unwrap().to_string(), "1/2");
    }
}
