//! Operator-level model of the repeater network.
//!
//! Each repeater couples signal mode `j` to its second input `−j` through a
//! cross-Kerr array sandwiched between two multiport transforms, detects
//! which auxiliary port fires (`k_j`), and phase-measures the second output
//! (`m_j`). In the photon-number basis the conditional repeater operator is
//! diagonal: a projector onto occupation differences `f_j − g_j ≡ k_j
//! (mod M+1)` times an `m_j`-dependent phase correction. The network output
//! is obtained by brute-force contraction: apply the diagonal, project the
//! second modes with the phase POVM, trace them out, and normalize.

use num_complex::Complex64;
use std::f64::consts::TAU;

use super::fock::{occupations_of, DensityOperator, FockStateVector};
use super::linalg::ComplexMatrix;
use super::OracleError;

/// Probability below which an outcome is flagged instead of normalized.
pub const OUTCOME_FLOOR: f64 = 1e-300;

/// One joint detection pattern of the network: auxiliary ports `k_j` and
/// phase results `m_j`, one of each per repeater.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepeaterOutcome {
    aux: Vec<usize>,
    phase: Vec<usize>,
}

impl RepeaterOutcome {
    pub fn new(aux: Vec<usize>, phase: Vec<usize>, truncation: usize) -> Result<Self, OracleError> {
        if aux.len() != phase.len() {
            return Err(OracleError::DimensionMismatch {
                left: aux.len(),
                right: phase.len(),
            });
        }
        for &value in aux.iter().chain(&phase) {
            if value > truncation {
                return Err(OracleError::OutcomeOutOfRange { value, truncation });
            }
        }
        Ok(Self { aux, phase })
    }

    pub fn aux(&self) -> &[usize] {
        &self.aux
    }

    pub fn phase(&self) -> &[usize] {
        &self.phase
    }

    /// The event class `k = ⌈Σ_j k_j⌉` the output state depends on.
    pub fn class(&self, truncation: usize) -> usize {
        self.aux.iter().sum::<usize>() % (truncation + 1)
    }
}

/// The multiport transform routing one photon among the `M + 1` auxiliary
/// modes: `U_{kl} = e^{i 2π k l/(M+1)} / √(M+1)`.
pub fn dft_matrix(truncation: usize) -> ComplexMatrix {
    let dim = truncation + 1;
    let scale = 1.0 / (dim as f64).sqrt();
    ComplexMatrix::from_fn(dim, dim, |k, l| {
        Complex64::from_polar(scale, TAU * (k * l) as f64 / dim as f64)
    })
}

/// Conditional Kerr-array block on the signal pair `(j, −j)` for auxiliary
/// detection `k_j`: the projector onto `f_j − g_j ≡ k_j (mod M+1)`, diagonal
/// in the pair Fock basis. Pair index is `f_j · cutoff + g_j`.
pub fn kerr_projector_block(k: usize, truncation: usize, cutoff: usize) -> ComplexMatrix {
    let period = truncation + 1;
    let dim = cutoff * cutoff;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for f in 0..cutoff {
        for g in 0..cutoff {
            if (f as i64 - g as i64).rem_euclid(period as i64) as usize == k {
                let idx = f * cutoff + g;
                out[(idx, idx)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    out
}

/// The same block built literally in the single-excitation auxiliary sector:
/// feed one photon into port 0 of the multiport, apply the Kerr phases
/// (`e^{i 2π (f−g) m/(M+1)}` on auxiliary state `m`), undo the multiport,
/// and project on detection pattern `k`. Kept as an independent construction
/// route for validating the closed-form projector.
pub fn kerr_block_explicit_sector(k: usize, truncation: usize, cutoff: usize) -> ComplexMatrix {
    let period = truncation + 1;
    let u = dft_matrix(truncation);
    let u_dag = u.adjoint();
    let dim = cutoff * cutoff;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for f in 0..cutoff {
        for g in 0..cutoff {
            let delta = f as i64 - g as i64;
            let kerr_diag: Vec<Complex64> = (0..period)
                .map(|m| Complex64::from_polar(1.0, TAU * delta as f64 * m as f64 / period as f64))
                .collect();
            let sector = u_dag.mul(&ComplexMatrix::from_diagonal(&kerr_diag)).mul(&u);
            let idx = f * cutoff + g;
            out[(idx, idx)] = sector[(k, 0)];
        }
    }
    out
}

/// Phase correction applied to signal mode `j` once the phase measurement on
/// `−j` reports `m_j`: `e^{i 2π m_j n̂_j/(M+1)}`, embedded on the pair.
pub fn phase_correction_block(m: usize, truncation: usize, cutoff: usize) -> ComplexMatrix {
    let period = truncation + 1;
    let dim = cutoff * cutoff;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for f in 0..cutoff {
        let phase = Complex64::from_polar(1.0, TAU * (m * f) as f64 / period as f64);
        for g in 0..cutoff {
            let idx = f * cutoff + g;
            out[(idx, idx)] = phase;
        }
    }
    out
}

/// Full conditional repeater operator on the pair `(j, −j)`:
/// phase correction for `m_j` times the Kerr projector for `k_j`.
pub fn repeater_operator(k: usize, m: usize, truncation: usize, cutoff: usize) -> ComplexMatrix {
    phase_correction_block(m, truncation, cutoff).mul(&kerr_projector_block(k, truncation, cutoff))
}

/// Modular phase-measurement POVM element for result `m` on a single mode:
/// `Π(m) = Σ_l |l, m⟩⟨l, m|` with `|l, m⟩ = (M+1)^{−1/2} Σ_n e^{i 2π m n/(M+1)}
/// |l(M+1)+n⟩`. The cutoff must hold complete modular blocks, otherwise the
/// elements would not sum to the identity.
pub fn povm_element(
    m: usize,
    truncation: usize,
    cutoff: usize,
) -> Result<ComplexMatrix, OracleError> {
    let period = truncation + 1;
    if !cutoff.is_multiple_of(period) {
        return Err(OracleError::IncompleteCutoff { cutoff, period });
    }
    if m > truncation {
        return Err(OracleError::OutcomeOutOfRange {
            value: m,
            truncation,
        });
    }
    let mut out = ComplexMatrix::zeros(cutoff, cutoff);
    let scale = 1.0 / period as f64;
    for l in 0..cutoff / period {
        for n in 0..period {
            for n_prime in 0..period {
                let row = l * period + n;
                let col = l * period + n_prime;
                out[(row, col)] = Complex64::from_polar(
                    scale,
                    TAU * m as f64 * (n as f64 - n_prime as f64) / period as f64,
                );
            }
        }
    }
    Ok(out)
}

/// Output of one conditional network contraction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutput {
    /// Probability of the detection pattern.
    pub probability: f64,
    /// Normalized reduced state of the first signal modes; `None` when the
    /// pattern has vanishing probability.
    pub state: Option<DensityOperator>,
}

/// Diagonal weight of the joint repeater operator on one joint basis state.
fn joint_diagonal(
    first: &[usize],
    second: &[usize],
    outcome: &RepeaterOutcome,
    period: usize,
) -> Complex64 {
    let mut phase = 0.0;
    for (j, (&f, &g)) in first.iter().zip(second).enumerate() {
        if (f as i64 - g as i64).rem_euclid(period as i64) as usize != outcome.aux[j] {
            return Complex64::new(0.0, 0.0);
        }
        phase += TAU * (outcome.phase[j] * f) as f64 / period as f64;
    }
    Complex64::from_polar(1.0, phase)
}

fn check_network_inputs(
    first: &DensityOperator,
    second: &DensityOperator,
    repeaters: usize,
    truncation: usize,
) -> Result<(), OracleError> {
    if first.modes() != second.modes() {
        return Err(OracleError::DimensionMismatch {
            left: first.modes(),
            right: second.modes(),
        });
    }
    if first.modes() != repeaters {
        return Err(OracleError::DimensionMismatch {
            left: first.modes(),
            right: repeaters,
        });
    }
    if first.cutoff() != second.cutoff() {
        return Err(OracleError::DimensionMismatch {
            left: first.cutoff(),
            right: second.cutoff(),
        });
    }
    let period = truncation + 1;
    if !first.cutoff().is_multiple_of(period) {
        return Err(OracleError::IncompleteCutoff {
            cutoff: first.cutoff(),
            period,
        });
    }
    Ok(())
}

/// Contract the network for one detection pattern.
///
/// Applies the joint conditional operator to `first ⊗ second`, projects the
/// second signal outputs onto the POVM element of `m`, traces them out, and
/// returns the normalized reduced state of the first signal modes together
/// with the pattern probability.
pub fn network_output(
    first: &DensityOperator,
    second: &DensityOperator,
    outcome: &RepeaterOutcome,
    truncation: usize,
) -> Result<NetworkOutput, OracleError> {
    check_network_inputs(first, second, outcome.aux.len(), truncation)?;
    let modes = first.modes();
    let cutoff = first.cutoff();
    let period = truncation + 1;
    let dim_block = cutoff.pow(modes as u32);

    // POVM element on the second modes: product of the single-mode elements.
    let mut povm = povm_element(outcome.phase[0], truncation, cutoff)?;
    for &m in &outcome.phase[1..] {
        povm = povm.kron(&povm_element(m, truncation, cutoff)?);
    }

    let joint = first.matrix().kron(second.matrix());
    let diag: Vec<Complex64> = (0..dim_block * dim_block)
        .map(|a| {
            let occ = occupations_of(a, 2 * modes, cutoff);
            joint_diagonal(&occ[..modes], &occ[modes..], outcome, period)
        })
        .collect();
    let live: Vec<usize> = (0..dim_block * dim_block)
        .filter(|&a| diag[a] != Complex64::new(0.0, 0.0))
        .collect();

    // T[aI][bI] = Σ_{aII,bII} y_a (R⊗ρ)_{ab} y_b* Π(m)[bII][aII]
    let mut reduced = ComplexMatrix::zeros(dim_block, dim_block);
    for &a in &live {
        let (a_first, a_second) = (a / dim_block, a % dim_block);
        let ya = diag[a];
        for &b in &live {
            let (b_first, b_second) = (b / dim_block, b % dim_block);
            let weight = povm[(b_second, a_second)];
            if weight == Complex64::new(0.0, 0.0) {
                continue;
            }
            reduced[(a_first, b_first)] += ya * joint[(a, b)] * diag[b].conj() * weight;
        }
    }

    finish_reduction(reduced, modes, cutoff)
}

/// Contract the network with vacuum on the second inputs and no phase
/// measurement: a single preparation collapses onto the product-index
/// eigenstate selected by the detection pattern `k`.
pub fn single_instant_output(
    input: &DensityOperator,
    aux: &[usize],
    truncation: usize,
) -> Result<NetworkOutput, OracleError> {
    let modes = input.modes();
    let cutoff = input.cutoff();
    if aux.len() != modes {
        return Err(OracleError::DimensionMismatch {
            left: aux.len(),
            right: modes,
        });
    }
    let period = truncation + 1;
    if let Some(&bad) = aux.iter().find(|&&k| k > truncation) {
        return Err(OracleError::OutcomeOutOfRange {
            value: bad,
            truncation,
        });
    }
    let dim_block = cutoff.pow(modes as u32);
    let outcome = RepeaterOutcome::new(aux.to_vec(), vec![0; modes], truncation)?;

    let vacuum = FockStateVector::vacuum(modes, cutoff).density();
    let joint = input.matrix().kron(vacuum.matrix());

    let diag: Vec<Complex64> = (0..dim_block * dim_block)
        .map(|a| {
            let occ = occupations_of(a, 2 * modes, cutoff);
            joint_diagonal(&occ[..modes], &occ[modes..], &outcome, period)
        })
        .collect();
    let live: Vec<usize> = (0..dim_block * dim_block)
        .filter(|&a| diag[a] != Complex64::new(0.0, 0.0))
        .collect();

    // Plain partial trace over the second modes.
    let mut reduced = ComplexMatrix::zeros(dim_block, dim_block);
    for &a in &live {
        let (a_first, a_second) = (a / dim_block, a % dim_block);
        for &b in &live {
            let (b_first, b_second) = (b / dim_block, b % dim_block);
            if a_second != b_second {
                continue;
            }
            reduced[(a_first, b_first)] += diag[a] * joint[(a, b)] * diag[b].conj();
        }
    }

    finish_reduction(reduced, modes, cutoff)
}

fn finish_reduction(
    reduced: ComplexMatrix,
    modes: usize,
    cutoff: usize,
) -> Result<NetworkOutput, OracleError> {
    let probability = reduced.trace().re;
    if probability < OUTCOME_FLOOR {
        return Ok(NetworkOutput {
            probability: probability.max(0.0),
            state: None,
        });
    }
    let normalized = reduced
        .scale(Complex64::new(1.0 / probability, 0.0))
        .symmetrized();
    Ok(NetworkOutput {
        probability,
        state: Some(DensityOperator::from_matrix(modes, cutoff, normalized)),
    })
}
