//! Simulator and analytic toolkit for NV-center quantum sensing.
//!
//! The crate is organized around a brute-force density-matrix engine
//! (`oracle`) that validates every closed-form protocol signal, noise
//! model, and sensitivity formula implemented in the analytic layers.
//!
//! Conventions:
//! - internal unit is angular frequency (rad/s); Hz only at interfaces
//! - gyromagnetic ratios are signed (the NV electron one is negative)
//! - polar angles are measured from the static-field direction

pub mod constants;
pub mod error;
pub mod metrology;
pub mod noise;
pub mod operators;
pub mod oracle;
pub mod protocols;
pub mod sequences;
pub mod system;

pub mod config;
pub mod report;
pub mod validation;

pub use constants::{Isotope, PhysicalConstants, Species};
pub use error::{Error, Result};
pub use operators::OperatorMatrix;
pub use system::{FieldEnvironment, SpinSystem, TargetSpin};

pub use nalgebra;
