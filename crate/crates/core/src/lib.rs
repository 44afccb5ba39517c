//! Normalized solutions of `-Delta u + mu u - Delta(u^2) u = g(u)`, `int u^2 = m`, on `R^N`.
//!
//! The quasilinear energy is handled through the dual variable `v = f^{-1}(u)`, which turns
//! it into a smooth semilinear functional. The crate provides radial ground states by
//! shooting, constrained energy minimization, minimax upper bounds and a regime classifier.

pub mod critical;
pub mod descent;
pub mod config;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod interp;
pub mod minimax;
pub mod nonlinearity;
pub mod regime;
pub mod ode;
pub mod output;
pub mod shooting;
pub mod transform;

pub use error::{Error, Result};
