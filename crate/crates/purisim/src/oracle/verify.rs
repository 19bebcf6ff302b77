//! Cross-checks of the index-level engine against the operator-level network.
//!
//! For random eigenstate families and random diagonal mixtures, the full
//! network contraction must reproduce the engine's single-step map and
//! outcome distribution once detection patterns are aggregated by their
//! event class. The harness also verifies the single-preparation collapse
//! onto product-index eigenstates, and can deliberately skip the engine-side
//! renormalization as a negative control for the comparison itself.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::mixture::MixtureState;

use super::fock::{tuples, DensityOperator, EigenstateSpec, FockStateVector};
use super::linalg::ComplexMatrix;
use super::network::{network_output, single_instant_output, RepeaterOutcome};
use super::{fidelity, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Negative-control hook: leave the engine-side prediction unnormalized
    /// so the comparison must fail.
    pub skip_renormalization: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 20,
            seed: 7,
            tolerance: 1e-9,
            skip_renormalization: false,
        }
    }
}

/// Aggregated deviations between network contraction and engine prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub truncation: usize,
    pub modes: usize,
    pub cutoff: usize,
    pub trials: usize,
    pub max_fidelity_deficit: f64,
    pub max_probability_deviation: f64,
    /// `(M+1)^{1−2N}`: the per-pattern probability factor implied by the
    /// eigenstate normalization and uniform phase statistics.
    pub expected_prefactor: f64,
    /// Mean of the measured per-pattern factor `p(m, k)/p(class)`.
    pub measured_prefactor: f64,
    pub max_prefactor_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Deviations of the single-preparation purification from its ideal law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleInstantReport {
    pub truncation: usize,
    pub modes: usize,
    pub cutoff: usize,
    pub trials: usize,
    pub max_fidelity_deficit: f64,
    pub max_probability_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn random_simplex<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let weights: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

struct EquivalenceTrial {
    fidelity_deficit: f64,
    probability_deviation: f64,
    prefactor_deviation: f64,
    prefactor_mean: f64,
}

fn equivalence_trial(
    truncation: usize,
    modes: usize,
    cutoff: usize,
    options: &VerifyOptions,
    trial: usize,
) -> Result<EquivalenceTrial, OracleError> {
    let mut rng = trial_rng(options.seed, trial);
    let period = truncation + 1;
    let max_l = cutoff / period - 1;
    let spec = EigenstateSpec::random(truncation, modes, max_l, &mut rng);

    let state = MixtureState::new(random_simplex(period, &mut rng)).expect("positive weights");
    let source = MixtureState::new(random_simplex(period, &mut rng)).expect("positive weights");
    let first = DensityOperator::from_eigen_mixture(&spec, &state, cutoff)?;
    let second = DensityOperator::from_eigen_mixture(&spec, &source, cutoff)?;
    let eigenstates: Vec<FockStateVector> = (0..period)
        .map(|n| spec.eigenstate(n, cutoff))
        .collect::<Result<_, _>>()?;

    let engine_dist = state
        .outcome_distribution(&source)
        .expect("same truncation");
    let expected_prefactor = (period as f64).powi(1 - 2 * modes as i32);

    // Aggregate every detection pattern by its event class.
    let dim = cutoff.pow(modes as u32);
    let mut class_prob = vec![0.0f64; period];
    let mut class_mat = vec![ComplexMatrix::zeros(dim, dim); period];
    let mut prefactor_deviation = 0.0f64;
    let mut prefactor_sum = 0.0f64;
    let mut prefactor_count = 0usize;
    for aux in tuples(period, modes) {
        for phase in tuples(period, modes) {
            let outcome = RepeaterOutcome::new(aux.clone(), phase, truncation)?;
            let class = outcome.class(truncation);
            let out = network_output(&first, &second, &outcome, truncation)?;
            class_prob[class] += out.probability;
            if let Some(state) = out.state {
                class_mat[class].add_scaled(state.matrix(), out.probability);
            }
            if engine_dist[class] > 1e-12 {
                let measured = out.probability / engine_dist[class];
                prefactor_sum += measured;
                prefactor_count += 1;
                prefactor_deviation = prefactor_deviation
                    .max((out.probability - expected_prefactor * engine_dist[class]).abs());
            }
        }
    }

    let mut fidelity_deficit = 0.0f64;
    let mut probability_deviation = 0.0f64;
    for class in 0..period {
        probability_deviation =
            probability_deviation.max((class_prob[class] - engine_dist[class]).abs());
        if class_prob[class] <= 1e-12 {
            continue;
        }
        let oracle_state = DensityOperator::from_matrix(
            modes,
            cutoff,
            class_mat[class]
                .scale(Complex64::new(1.0 / class_prob[class], 0.0))
                .symmetrized(),
        );
        let predicted = if options.skip_renormalization {
            // Corrupted engine: posterior weights left unnormalized.
            let raw: Vec<f64> = (0..period)
                .map(|n| {
                    state.prob(n)
                        * source.prob(crate::mixture::mod_index(
                            n as i64 - class as i64,
                            truncation,
                        ))
                })
                .collect();
            DensityOperator::from_weighted_states(&eigenstates, &raw)?
        } else {
            let stepped = state
                .step(&source, class)
                .expect("class has positive probability");
            DensityOperator::from_eigen_mixture(&spec, &stepped, cutoff)?
        };
        let fid = fidelity(&oracle_state, &predicted)?;
        fidelity_deficit = fidelity_deficit.max(1.0 - fid);
    }

    Ok(EquivalenceTrial {
        fidelity_deficit,
        probability_deviation,
        prefactor_deviation,
        prefactor_mean: prefactor_sum / prefactor_count.max(1) as f64,
    })
}

/// Compare the network contraction against the engine for random diagonal
/// mixtures in random eigenstate families.
pub fn verify_engine_equivalence(
    truncation: usize,
    modes: usize,
    cutoff: usize,
    options: &VerifyOptions,
) -> Result<EquivalenceReport, OracleError> {
    let period = truncation + 1;
    if !cutoff.is_multiple_of(period) || cutoff == 0 {
        return Err(OracleError::IncompleteCutoff { cutoff, period });
    }
    let trials: Vec<EquivalenceTrial> = (0..options.trials)
        .into_par_iter()
        .map(|trial| equivalence_trial(truncation, modes, cutoff, options, trial))
        .collect::<Result<_, _>>()?;

    let mut report = EquivalenceReport {
        truncation,
        modes,
        cutoff,
        trials: options.trials,
        max_fidelity_deficit: 0.0,
        max_probability_deviation: 0.0,
        expected_prefactor: (period as f64).powi(1 - 2 * modes as i32),
        measured_prefactor: 0.0,
        max_prefactor_deviation: 0.0,
        tolerance: options.tolerance,
        pass: false,
    };
    for trial in &trials {
        report.max_fidelity_deficit = report.max_fidelity_deficit.max(trial.fidelity_deficit);
        report.max_probability_deviation = report
            .max_probability_deviation
            .max(trial.probability_deviation);
        report.max_prefactor_deviation = report
            .max_prefactor_deviation
            .max(trial.prefactor_deviation);
        report.measured_prefactor += trial.prefactor_mean / trials.len() as f64;
    }
    report.pass = report.max_fidelity_deficit < options.tolerance
        && report.max_probability_deviation < options.tolerance;
    Ok(report)
}

fn single_instant_trial(
    truncation: usize,
    modes: usize,
    cutoff: usize,
    options: &VerifyOptions,
    trial: usize,
) -> Result<(f64, f64), OracleError> {
    let mut rng = trial_rng(options.seed ^ 0x5eed_5eed, trial);
    let period = truncation + 1;
    let max_l = cutoff / period - 1;
    let spec = EigenstateSpec::random(truncation, modes, max_l, &mut rng);

    let index_tuples = tuples(period, modes);
    let weights = random_simplex(index_tuples.len(), &mut rng);
    let states: Vec<FockStateVector> = index_tuples
        .iter()
        .map(|n| spec.product_eigenstate(n, cutoff))
        .collect::<Result<_, _>>()?;
    let input = DensityOperator::from_weighted_states(&states, &weights)?;

    let mut fidelity_deficit = 0.0f64;
    let mut probability_deviation = 0.0f64;
    for (tuple, (weight, target)) in index_tuples.iter().zip(weights.iter().zip(&states)) {
        let out = single_instant_output(&input, tuple, truncation)?;
        probability_deviation = probability_deviation.max((out.probability - weight).abs());
        let state = out
            .state
            .expect("pattern matching a mixture component is live");
        fidelity_deficit = fidelity_deficit.max(1.0 - state.overlap_with_pure(target));
    }
    Ok((fidelity_deficit, probability_deviation))
}

/// Verify the single-preparation collapse: pattern `k` fires with the weight
/// of `|Ψ_k⟩` in the input mixture and leaves exactly that eigenstate.
pub fn verify_single_instant(
    truncation: usize,
    modes: usize,
    cutoff: usize,
    options: &VerifyOptions,
) -> Result<SingleInstantReport, OracleError> {
    let period = truncation + 1;
    if !cutoff.is_multiple_of(period) || cutoff == 0 {
        return Err(OracleError::IncompleteCutoff { cutoff, period });
    }
    let trials: Vec<(f64, f64)> = (0..options.trials)
        .into_par_iter()
        .map(|trial| single_instant_trial(truncation, modes, cutoff, options, trial))
        .collect::<Result<_, _>>()?;
    let max_fidelity_deficit = trials.iter().map(|t| t.0).fold(0.0, f64::max);
    let max_probability_deviation = trials.iter().map(|t| t.1).fold(0.0, f64::max);
    Ok(SingleInstantReport {
        truncation,
        modes,
        cutoff,
        trials: options.trials,
        max_fidelity_deficit,
        max_probability_deviation,
        tolerance: options.tolerance,
        pass: max_fidelity_deficit < options.tolerance
            && max_probability_deviation < options.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_equivalence_holds_for_the_smallest_cases() {
        let options = VerifyOptions {
            trials: 4,
            seed: 11,
            ..Default::default()
        };
        for &(truncation, modes) in &[(1usize, 1usize), (1, 2), (2, 1)] {
            let cutoff = 2 * (truncation + 1);
            let report = verify_engine_equivalence(truncation, modes, cutoff, &options).unwrap();
            assert!(
                report.pass,
                "(M={truncation}, N={modes}): deficit {}, deviation {}",
                report.max_fidelity_deficit, report.max_probability_deviation
            );
            // The measured per-pattern factor is the predicted one.
            assert!(
                (report.measured_prefactor - report.expected_prefactor).abs()
                    < 1e-9 * report.expected_prefactor.max(1.0),
                "prefactor {} vs {}",
                report.measured_prefactor,
                report.expected_prefactor
            );
        }
    }

    #[test]
    fn corrupted_engine_fails_the_comparison() {
        let options = VerifyOptions {
            trials: 2,
            seed: 13,
            skip_renormalization: true,
            ..Default::default()
        };
        let report = verify_engine_equivalence(1, 1, 4, &options).unwrap();
        assert!(!report.pass);
        assert!(report.max_fidelity_deficit > 1e-3);
    }

    #[test]
    fn single_instant_matches_component_weights() {
        let options = VerifyOptions {
            trials: 4,
            seed: 17,
            tolerance: 1e-10,
            ..Default::default()
        };
        let report = verify_single_instant(1, 2, 4, &options).unwrap();
        assert!(
            report.pass,
            "deficit {}, deviation {}",
            report.max_fidelity_deficit, report.max_probability_deviation
        );
    }

    #[test]
    fn output_state_depends_only_on_the_event_class() {
        // Every detection pattern with the same ⌈Σ k_j⌉ leaves the same
        // normalized output state, whatever the phase results were.
        let truncation = 1;
        let modes = 2;
        let cutoff = 4;
        let mut rng = trial_rng(29, 0);
        let spec = EigenstateSpec::random(truncation, modes, 1, &mut rng);
        let state = MixtureState::new(random_simplex(truncation + 1, &mut rng)).unwrap();
        let source = MixtureState::new(random_simplex(truncation + 1, &mut rng)).unwrap();
        let first = DensityOperator::from_eigen_mixture(&spec, &state, cutoff).unwrap();
        let second = DensityOperator::from_eigen_mixture(&spec, &source, cutoff).unwrap();

        let mut reference: Vec<Option<DensityOperator>> = vec![None; truncation + 1];
        for aux in crate::oracle::fock::tuples(truncation + 1, modes) {
            for phase in crate::oracle::fock::tuples(truncation + 1, modes) {
                let outcome = RepeaterOutcome::new(aux.clone(), phase, truncation).unwrap();
                let class = outcome.class(truncation);
                let out = network_output(&first, &second, &outcome, truncation).unwrap();
                let state = out
                    .state
                    .expect("positive mixtures keep every pattern live");
                match &reference[class] {
                    None => reference[class] = Some(state),
                    Some(seen) => {
                        let diff = seen.matrix().max_abs_diff(state.matrix());
                        assert!(diff < 1e-12, "class {class}: states differ by {diff}");
                    }
                }
            }
        }
    }

    #[test]
    fn pure_network_input_keeps_its_eigenstate() {
        // A pure |Ψ_n⟩ in the loop stays |Ψ_n⟩; class k fires with the
        // source weight at index ⌈n−k⌉.
        let truncation = 2;
        let modes = 1;
        let cutoff = 6;
        let mut rng = trial_rng(23, 0);
        let spec = EigenstateSpec::random(truncation, modes, 1, &mut rng);
        let source = MixtureState::new(random_simplex(truncation + 1, &mut rng)).unwrap();
        let second = DensityOperator::from_eigen_mixture(&spec, &source, cutoff).unwrap();

        for n in 0..=truncation {
            let pure = MixtureState::pure(n, truncation).unwrap();
            let first = DensityOperator::from_eigen_mixture(&spec, &pure, cutoff).unwrap();
            let target = spec.eigenstate(n, cutoff).unwrap();
            for class in 0..=truncation {
                let mut prob = 0.0;
                let mut matrix = ComplexMatrix::zeros(cutoff, cutoff);
                for phase in 0..=truncation {
                    let outcome =
                        RepeaterOutcome::new(vec![class], vec![phase], truncation).unwrap();
                    let out = network_output(&first, &second, &outcome, truncation).unwrap();
                    prob += out.probability;
                    if let Some(state) = out.state {
                        matrix.add_scaled(state.matrix(), out.probability);
                    }
                }
                let expected = source.prob(crate::mixture::mod_index(
                    n as i64 - class as i64,
                    truncation,
                ));
                assert!((prob - expected).abs() < 1e-10);
                if prob > 1e-12 {
                    let state = DensityOperator::from_matrix(
                        modes,
                        cutoff,
                        matrix.scale(Complex64::new(1.0 / prob, 0.0)).symmetrized(),
                    );
                    assert!(state.overlap_with_pure(&target) > 1.0 - 1e-10);
                }
            }
        }
    }
}
