//! Kinetic Monte Carlo simulation of thermal errors in a two-dimensional
//! Z_N quantum memory with a grid of charge-modifying defect lines.
//!
//! Electric charges live on the faces of an `L × L` torus and are moved,
//! split, fused, created and annihilated by single-qudit `X^a` events whose
//! rates follow the Davies weak-coupling law. Defect lines multiply the
//! charge of a crossing excitation by `M (mod N)`, which makes light
//! excitations turn heavy as they spread. A hard-decision renormalization
//! group decoder with defect-aware transport estimates recovery, from which
//! coherence times and their scaling fits are extracted.
//!
//! The floating-point parts (energies, rates, the event index, fits) are
//! generic over [`Real`]; the aliases below fix them to `f64`.

pub mod config;
pub mod decoder;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod kmc;
pub mod lattice;
pub mod linalg;
pub mod real;
pub mod run;
pub mod zn;

pub use decoder::{HdrgDecoder, Recovery};
pub use error::{Error, Result};
pub use lattice::{ErrorState, Lattice, LatticeSpec};
pub use real::Real;

pub type MassVector = energy::MassVector<f64>;
pub type Dynamics<'a> = kmc::Dynamics<'a, f64>;
pub type Trajectory<'d> = kmc::Trajectory<'d, f64>;
pub type FitReport = experiments::fit::FitReport<f64>;
