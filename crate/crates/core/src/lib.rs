//! Risk-averse multistage stochastic optimization with multicut SDDP.
//!
//! The stage model is a hydrothermal dispatch with reservoirs, autoregressive
//! inflows and a transport network. The engine trains per-opening cut pools
//! under a nested `(1 - lambda) E + lambda CVaR_alpha` objective and can sample
//! forward paths with risk-adjusted weights, so the path mean is a valid
//! upper-bound estimate. [`detequiv`] solves the expanded tree exactly for
//! small cases.

pub mod cli;
pub mod detequiv;
pub mod error;
pub mod hydrothermal;
pub mod io;
pub mod lp;
pub mod risk;
pub mod scenario;
pub mod sddp;
pub mod synthetic;

pub use error::{Error, Result};
