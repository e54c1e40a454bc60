//! Finite-scale finitely Suslinian monotone models of planar compacta.
//!
//! A compactum is described symbolically in a small DSL ([`cdl`]), truncated
//! to a finite complex of exact-rational cells ([`truncation`]), and analyzed:
//! limit continua and θ-configurations ([`analysis`]), unshieldedness and
//! topological hulls on a raster ([`raster`]), the finest closed equivalence
//! collapsing the limit continua together with quotient metrics and
//! finitely-Suslinian checks ([`relations`]), and semiconjugacy of symbolic
//! self-maps with the quotients ([`dynamics`]).
//!
//! All arithmetic is exact: coordinates are arbitrary-precision rationals and
//! every metric notion uses the L∞ distance, which keeps distances between
//! rational geometries rational.

pub mod analysis;
pub mod cdl;
pub mod cli;
pub mod dynamics;
pub mod geometry;
pub mod raster;
pub mod relations;
pub mod render;
pub mod truncation;
