//! Numerical homogenization of Lévy integro-differential operators with
//! asymmetric jump densities.
//!
//! The pipeline: rescale a jump density to extract its most singular part,
//! check the controllability of the induced jump process on the torus, solve
//! ergodic cell problems by the vanishing-discount method, tabulate the
//! effective nonlocal operator, and verify that oscillatory Dirichlet
//! solutions converge to the effective solution.
//!
//! Each major capability has a runnable example under `examples/`; a thin
//! `levy-homog` binary drives the same pipeline from JSON configs.

pub mod cell;
pub mod config;
pub mod effective;
pub mod error;
pub mod expr;
pub mod grid;
pub mod homogenize;
pub mod linalg;
pub mod measures;
pub mod operator;
pub mod pipeline;
pub mod quadrature;
pub mod reachability;

pub use error::{Error, Result};
