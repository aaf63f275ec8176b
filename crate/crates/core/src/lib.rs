//! Complete orthonormal bases for the equivariant linear maps of matrix groups.
//!
//! A group is described by nothing more than its discrete generators and a
//! basis of its Lie algebra, acting on some base space. Representations are
//! built from that base space with duals, direct sums and tensor products,
//! and the symmetric (invariant) subspace of any such representation is the
//! nullspace of one constraint per generator. This crate assembles those
//! constraints as structured linear operators, solves for the nullspace
//! either densely (SVD-grade) or with a matrix-free gradient iteration, and
//! stacks the resulting bases into forward-pass equivariant networks for
//! end-to-end verification.
//!
//! The main entry points are [`groups::Group`] (a catalog of built-in groups
//! plus JSON-defined custom ones), [`reps::Rep`] (the representation
//! algebra), and [`solver::Solver`] (basis computation with caching).

pub mod emlp;
pub mod error;
pub mod field;
pub mod groups;
pub mod linop;
pub mod reps;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Scalar, ScalarField, C64};
