//! Numerical laboratory for a scalar conformal-factor flow on a flat
//! periodic chart: geometry presets, the weighted Laplacian and its low
//! spectrum, explicit time integration in two equivalent formulations,
//! and the diagnostics that track the flow's conserved and monotone
//! quantities.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod operators;
pub mod ops;
pub mod runner;
pub mod spinorial;

pub use error::{Error, Result};
