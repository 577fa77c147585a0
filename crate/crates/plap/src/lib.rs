//! Numerical toolkit for nonnegative solutions of the Dirichlet p-Laplacian
//! problem  -div(|grad u|^{p-2} grad u) = f(x, u)  on an interval or
//! rectangle, discretised on uniform tensor grids.
//!
//! The pieces fit together like this: [`mesh`] provides grids, quadrature and
//! staggered cell gradients; [`expr`] parses right-hand sides f(x, s);
//! [`operators`] implements the two energies, their derivative densities and
//! the nonnegative-cone machinery; [`resolvent`] inverts the regularised
//! operator duality_map + alpha * grad_a; [`eig`] computes the principal
//! eigenvalue by resolvent-based inverse iteration; [`degree`] turns the
//! asymptotic slopes of f into closed-form index verdicts and searches for
//! coincidences with a damped fixed-point iteration.
//!
//! On top of the library, [`problem`] reads problem descriptions from spec
//! files, [`check`] runs seeded self-checks of every documented invariant,
//! and [`cli`] exposes the `eig`, `solve`, `degree` and `check` subcommands.

pub mod check;
pub mod cli;
pub mod degree;
pub mod eig;
pub mod error;
pub mod expr;
pub mod mesh;
pub mod operators;
pub mod problem;
pub mod resolvent;

pub use error::{Error, Result};
