//! Newton-step-targeted local Bayesian optimization.
//!
//! The crate couples a derivative-aware Gaussian-process surrogate (analytic
//! gradient and Hessian posteriors under an SE-ARD kernel) with an
//! acquisition that shrinks the lookahead uncertainty of the Newton step
//! π^g + ŝ·π^H, a damped Newton update with Armijo backtracking on the GP
//! mean, and a sparse-subspace variant for high ambient dimensions. A seeded
//! experiment harness reproduces the synthetic benchmark studies.

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod lowdisc;
pub mod opt;

pub mod acquisition;
pub mod newton;
pub mod oracle;
pub mod subspace;
pub mod benchfns;
pub mod gp;
pub mod harness;

pub use error::{Error, Result};
