//! Spacelike CMC-1 faces in de Sitter 3-space.
//!
//! Faces are built from Weierstrass-type data through a holomorphic null
//! lift `F` into `SL(2,C)` and projected by `f = F e3 F*`. The crate covers
//! lifts, end monodromy and its SU(1,1) classification, singular-set tracing,
//! the global degree inequality and mesh export.

pub mod expr;
pub mod face;
pub mod frames;
pub mod gallery;
pub mod mink;
pub mod monodromy;
pub mod osserman;
pub mod rk;
pub mod spec;
pub mod su11;
pub mod surface;
