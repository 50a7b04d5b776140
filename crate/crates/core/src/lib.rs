//! Half-range boundary value problems `dψ/dx = −JLψ + f` on a slab or the
//! half-space, with `B = JL` J-self-adjoint and J-positive.
//!
//! The pipeline runs bottom-up through the modules:
//! [`problem`] describes Sturm–Liouville coefficients with a sign-changing weight,
//! [`discretize`] turns them into a weighted finite-dimensional model `(W, L, J)`,
//! [`krein`] decomposes `B`, [`halfrange`] and [`duhamel`] solve the homogeneous
//! and forced problems, [`kinetic`] reduces `T ψ' = −Aψ + f` to the same form,
//! and [`oracle`] holds independent brute-force solvers used for validation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod banded;
pub mod discretize;
pub mod duhamel;
pub mod export;
pub mod halfrange;
pub mod kinetic;
pub mod krein;
mod linalg;
pub mod oracle;
pub mod problem;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Problem(#[from] problem::ProblemError),
    #[error(transparent)]
    Discretize(#[from] discretize::DiscretizeError),
    #[error(transparent)]
    Krein(#[from] krein::KreinError),
    #[error(transparent)]
    HalfRange(#[from] halfrange::HalfRangeError),
    #[error(transparent)]
    Duhamel(#[from] duhamel::DuhamelError),
    #[error(transparent)]
    Kinetic(#[from] kinetic::KineticError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
}
