//! Exact truncated Fock-space reference for the purification network.
//!
//! The index-level engine in [`crate::mixture`] never touches amplitudes; it
//! trusts that the repeater network implements the multiplicative reweighting
//! it iterates. This module earns that trust by brute force: it builds the
//! signal eigenstates in the photon-number basis, assembles the conditional
//! repeater operators and the modular phase POVM as explicit matrices,
//! contracts the whole network for every detection pattern, and compares the
//! reduced output states and probabilities against the engine's predictions.
//!
//! Everything here is dense and desk-scale by design (a few hundred Fock
//! basis states at most); clarity beats asymptotics in a reference
//! implementation.

mod fock;
mod linalg;
mod network;
mod verify;

use thiserror::Error;

pub use fock::{fidelity, DensityOperator, EigenstateSpec, FockStateVector};
pub use linalg::ComplexMatrix;
pub use network::{
    dft_matrix, kerr_block_explicit_sector, kerr_projector_block, network_output,
    phase_correction_block, povm_element, repeater_operator, single_instant_output, NetworkOutput,
    RepeaterOutcome, OUTCOME_FLOOR,
};
pub use verify::{
    verify_engine_equivalence, verify_single_instant, EquivalenceReport, SingleInstantReport,
    VerifyOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("occupation {occupation} of mode {mode} does not fit below cutoff {cutoff}")]
    CutoffOverflow {
        mode: usize,
        occupation: usize,
        cutoff: usize,
    },
    #[error("cutoff {cutoff} is not a multiple of {period}; modular blocks would be incomplete")]
    IncompleteCutoff { cutoff: usize, period: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("value {value} exceeds truncation order {truncation}")]
    OutcomeOutOfRange { value: usize, truncation: usize },
    #[error("eigenstate coefficients for index {n} have squared norm {norm}, expected 1")]
    UnnormalizedCoefficients { n: usize, norm: f64 },
    #[error("invalid eigenstate family: {0}")]
    InvalidSpec(String),
    #[error("matrix is not Hermitian: largest defect {0}")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("matrix has negative eigenvalue {0}")]
    NotPositive(f64),
}
