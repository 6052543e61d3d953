//! Exact combinatorial solutions of the Schwarzian octahedron recurrence
//! (dSKP) and its relatives, via oriented dimers, Kasteleyn determinants
//! and complementary trees and forests on Aztec diamonds.

pub mod aztec;
pub mod chi;
pub mod cwgraph;
pub mod dimer;
pub mod error;
pub mod field;
pub mod forests;
pub mod lattice;
pub mod limitshape;
pub mod linalg;
pub mod poly;
pub mod projective;
pub mod verify;

pub use error::{DskpError, ParseError, Result};
pub use field::{Field, GaussianRational, Rational};
pub use poly::{MultiPoly, RationalFunction};
pub use projective::ProjectiveValue;
