//! Riemannian gradient descent laboratory.
//!
//! This crate implements constant-step and line-search (Riemannian) gradient
//! descent on a small catalog of manifolds, together with the analysis tools
//! needed to study when these iterations avoid strict saddle points:
//! iteration-map differentials, singular step-size scans, step-size bound
//! formulas, and a deterministic Monte Carlo experiment harness.

pub mod analysis;
pub mod cli;
pub mod costs;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod optimizers;

pub use error::{Error, Result};
