//! Simulation toolkit for iterative random purification of truncated
//! multi-mode mixtures.
//!
//! The protocol consumes a stream of identically prepared signal copies; each
//! cycle couples the circulating signal to a fresh copy, detects an outcome
//! `k`, and multiplicatively reweights the signal mixture. A run is a random
//! walk on the probability simplex that, left alone, eventually concentrates
//! on a single eigenstate.
//!
//! The crate is split by level of description:
//!
//! - [`mixture`]: the index-level engine. Single steps, binary
//!   coarse-graining, closed forms for whole detection histories, entropy.
//! - [`trajectory`]: seeded Monte Carlo runs and ensembles on top of the
//!   engine, with deterministic, worker-independent results.
//! - [`catloss`]: the two-component cat-mixture application. Eigensystem,
//!   loss-induced decay of the purity parameter, feedback-efficiency
//!   recursion, stationary bounds and thresholds.
//! - [`oracle`]: an exact truncated Fock-space simulation of the repeater
//!   network, used as a brute-force reference that validates the index-level
//!   engine against the operator-level physics.

pub mod catloss;
pub mod mixture;
pub mod oracle;
pub mod trajectory;

pub use mixture::{
    mod_index, state_from_binary_counts, state_from_counts, BinaryEvent, BinaryRecord,
    ClosedFormState, EventCounts, EventRecord, MixtureError, MixtureState,
};
pub use trajectory::{
    force_binary_record, force_record, run_ensemble, run_indexed_trajectory, run_trajectory,
    DetectionMode, DetectionRecord, EnsembleSummary, TrajectoryConfig, TrajectoryError,
    TrajectoryResult,
};
