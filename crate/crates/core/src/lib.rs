//! Partitioned exponential W-methods for stiff multiphysics ODEs.
//!
//! The crate provides dense and Krylov evaluation of phi-functions, the
//! PEXPW, PEPIRKW and PSEPIRK steppers with fixed and adaptive drivers, a
//! TPS-tree B-series engine that verifies method order in exact arithmetic,
//! and four benchmark problems with convergence-study tooling.

pub mod error;
pub mod experiments;
pub mod integrators;
pub mod krylov;
pub mod operators;
pub mod order_conditions;
pub mod phi;
pub mod problems;
pub mod reference;
pub mod tableaus;

pub use error::{Error, Result};
