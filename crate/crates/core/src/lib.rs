//! Augmented scalar-auxiliary-variable finite element solver for the
//! stochastic Cahn-Hilliard equation with Allen-Cahn-type dynamic boundary
//! conditions and multiplicative Q-Wiener noise.
//!
//! The crate is organised bottom-up:
//! [`mesh`] and [`fem`] build the P1 discretization of the unit square,
//! [`potentials`] holds the bulk and boundary free energies, [`noise`] samples
//! the truncated Wiener increments, [`stepper`] solves one time step,
//! [`diagnostics`] checks the discrete energy identity and collects path
//! statistics, and [`harness`] drives single runs, Monte Carlo ensembles and
//! convergence studies.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod noise;
pub mod potentials;
pub mod rng;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use fem::FemOperators;
pub use mesh::TriMesh;
pub use noise::{NoiseField, NoiseModel, NoiseParams, RhoKind, RvKind};
pub use potentials::PotentialSpec;
pub use stepper::{InitialCondition, SavState, SavVariant, Stepper};
