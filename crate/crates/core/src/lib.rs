//! Self-testing linear witnesses for qubit prepare-and-measure scenarios.
//!
//! The crate builds witnesses whose maximum singles out a target set of
//! qubit states (and, through them, an extremal three- or four-outcome
//! POVM), evaluates them, bounds them for classical, real-qubit and
//! complex-qubit models, and simulates and certifies finite-shot runs.

pub mod bounds;
pub mod builder;
pub mod bundle;
pub mod certify;
pub mod error;
pub mod eval;
mod linalg;
pub mod qstate;
pub mod sim;
pub mod witness;

pub use error::{Error, Result};
pub use qstate::{BinaryMeasurement, BlochVector, GramMatrix, Povm, PovmElement, QubitState};
pub use witness::WitnessMatrix;
