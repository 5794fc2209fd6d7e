//! Conserved-phase-separation simulator: a semi-implicit cosine-spectral
//! solver for a heat/Cahn-Hilliard system whose balance law is perturbed by
//! a maximal monotone operator, plus the sliding-mode control experiments
//! built on top of it.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod graphs;
pub mod grid;
pub mod smc;
pub mod snapshot;
pub mod stepper;
