//! Truncated multi-mode Fock-space states and density operators.
//!
//! Amplitude arrays are indexed by photon-number tuples in row-major mode
//! order: mode 0 varies slowest, so the flat index of occupations
//! `(n_0, ..., n_{N−1})` at per-mode cutoff `D` is `Σ_j n_j · D^{N−1−j}`.
//! The signal eigenstates are built in the photon-number basis; the modular
//! structure lives in the residues `f_j mod (M + 1)` of the occupations.

use num_complex::Complex64;
use rand::Rng;

use super::linalg::ComplexMatrix;
use super::OracleError;

/// Flat index of an occupation tuple.
pub(crate) fn index_of(occupations: &[usize], cutoff: usize) -> usize {
    occupations.iter().fold(0, |acc, &n| acc * cutoff + n)
}

/// Occupation tuple of a flat index.
pub(crate) fn occupations_of(mut index: usize, modes: usize, cutoff: usize) -> Vec<usize> {
    let mut occ = vec![0; modes];
    for slot in occ.iter_mut().rev() {
        *slot = index % cutoff;
        index /= cutoff;
    }
    occ
}

/// A pure state of `modes` modes, each truncated at `cutoff` Fock levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockStateVector {
    modes: usize,
    cutoff: usize,
    amplitudes: Vec<Complex64>,
}

impl FockStateVector {
    pub fn zero(modes: usize, cutoff: usize) -> Self {
        assert!(modes >= 1 && cutoff >= 1);
        Self {
            modes,
            cutoff,
            amplitudes: vec![Complex64::new(0.0, 0.0); cutoff.pow(modes as u32)],
        }
    }

    /// The vacuum `|0, ..., 0⟩`.
    pub fn vacuum(modes: usize, cutoff: usize) -> Self {
        let mut state = Self::zero(modes, cutoff);
        state.amplitudes[0] = Complex64::new(1.0, 0.0);
        state
    }

    /// The basis state with the given occupations.
    pub fn basis_state(
        modes: usize,
        cutoff: usize,
        occupations: &[usize],
    ) -> Result<Self, OracleError> {
        if occupations.len() != modes {
            return Err(OracleError::DimensionMismatch {
                left: occupations.len(),
                right: modes,
            });
        }
        if let Some((mode, &occupation)) =
            occupations.iter().enumerate().find(|(_, n)| **n >= cutoff)
        {
            return Err(OracleError::CutoffOverflow {
                mode,
                occupation,
                cutoff,
            });
        }
        let mut state = Self::zero(modes, cutoff);
        state.amplitudes[index_of(occupations, cutoff)] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Complex64 {
        self.amplitudes[index_of(occupations, self.cutoff)]
    }

    #[cfg(test)]
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        let mut out = self.clone();
        for a in &mut out.amplitudes {
            *a /= norm;
        }
        out
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Relabel two mode indices (the formal mode-transfer map); a
    /// permutation of the amplitude array. Transferring twice is the
    /// identity, and the map is its own adjoint.
    pub fn mode_transfer(&self, from: usize, to: usize) -> Result<Self, OracleError> {
        for mode in [from, to] {
            if mode >= self.modes {
                return Err(OracleError::ModeOutOfRange {
                    mode,
                    modes: self.modes,
                });
            }
        }
        let mut out = Self::zero(self.modes, self.cutoff);
        for (index, &amp) in self.amplitudes.iter().enumerate() {
            let mut occ = occupations_of(index, self.modes, self.cutoff);
            occ.swap(from, to);
            out.amplitudes[index_of(&occ, self.cutoff)] = amp;
        }
        Ok(out)
    }

    /// The projector `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityOperator {
        let dim = self.dim();
        let mat = ComplexMatrix::from_fn(dim, dim, |i, j| {
            self.amplitudes[i] * self.amplitudes[j].conj()
        });
        DensityOperator {
            modes: self.modes,
            cutoff: self.cutoff,
            mat,
        }
    }
}

/// Coefficients `c_l(n)` defining the signal eigenstate family.
///
/// For each index `n` the state spreads over Fock levels
/// `l_j (M+1) + n_j` with `⌈Σ_j n_j⌉ = n`; the `l`-support is finite and the
/// coefficients of each `n` are normalized, `Σ_l |c_l(n)|² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenstateSpec {
    truncation: usize,
    modes: usize,
    /// Per index `n`: list of `(l-tuple, coefficient)` pairs.
    coeffs: Vec<Vec<(Vec<usize>, Complex64)>>,
}

impl EigenstateSpec {
    pub fn new(
        truncation: usize,
        modes: usize,
        coeffs: Vec<Vec<(Vec<usize>, Complex64)>>,
    ) -> Result<Self, OracleError> {
        if modes == 0 {
            return Err(OracleError::InvalidSpec(
                "at least one mode is required".into(),
            ));
        }
        if coeffs.len() != truncation + 1 {
            return Err(OracleError::InvalidSpec(format!(
                "need coefficients for {} indices, got {}",
                truncation + 1,
                coeffs.len()
            )));
        }
        for (n, support) in coeffs.iter().enumerate() {
            let mut norm = 0.0;
            for (l_tuple, c) in support {
                if l_tuple.len() != modes {
                    return Err(OracleError::InvalidSpec(format!(
                        "l-tuple {l_tuple:?} for index {n} has wrong length"
                    )));
                }
                norm += c.norm_sqr();
            }
            if (norm - 1.0).abs() > 1e-12 {
                return Err(OracleError::UnnormalizedCoefficients { n, norm });
            }
        }
        Ok(Self {
            truncation,
            modes,
            coeffs,
        })
    }

    /// The minimal family: every index supported on `l = (0, ..., 0)` only,
    /// i.e. eigenstates living in the lowest modular block.
    pub fn ground(truncation: usize, modes: usize) -> Self {
        let support = vec![(vec![0; modes], Complex64::new(1.0, 0.0))];
        Self {
            truncation,
            modes,
            coeffs: vec![support; truncation + 1],
        }
    }

    /// Random coefficients over the full `l ∈ {0, ..., max_l}^N` grid,
    /// normalized per index. Used to exercise the oracle on generic families.
    pub fn random<R: Rng>(truncation: usize, modes: usize, max_l: usize, rng: &mut R) -> Self {
        let l_tuples = tuples(max_l + 1, modes);
        let coeffs = (0..=truncation)
            .map(|_| {
                let raw: Vec<(Vec<usize>, Complex64)> = l_tuples
                    .iter()
                    .map(|l| {
                        (
                            l.clone(),
                            Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)),
                        )
                    })
                    .collect();
                let norm: f64 = raw.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
                raw.into_iter().map(|(l, c)| (l, c / norm)).collect()
            })
            .collect();
        Self {
            truncation,
            modes,
            coeffs,
        }
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Smallest per-mode cutoff that holds every supported level.
    pub fn required_cutoff(&self) -> usize {
        let max_l = self
            .coeffs
            .iter()
            .flatten()
            .flat_map(|(l, _)| l.iter().copied())
            .max()
            .unwrap_or(0);
        max_l * (self.truncation + 1) + self.truncation + 1
    }

    fn check_levels(
        &self,
        l_tuple: &[usize],
        n_tuple: &[usize],
        cutoff: usize,
    ) -> Result<(), OracleError> {
        for (mode, (&l, &n)) in l_tuple.iter().zip(n_tuple).enumerate() {
            let occupation = l * (self.truncation + 1) + n;
            if occupation >= cutoff {
                return Err(OracleError::CutoffOverflow {
                    mode,
                    occupation,
                    cutoff,
                });
            }
        }
        Ok(())
    }

    /// Build the eigenstate `|Ψ_n⟩`: prefactor `(M+1)^{(1−N)/2}` times the
    /// sum over all index tuples with `⌈Σ_j n_j⌉ = n`.
    pub fn eigenstate(&self, n: usize, cutoff: usize) -> Result<FockStateVector, OracleError> {
        if n > self.truncation {
            return Err(OracleError::OutcomeOutOfRange {
                value: n,
                truncation: self.truncation,
            });
        }
        let period = self.truncation + 1;
        let prefactor = (period as f64).powf((1.0 - self.modes as f64) / 2.0);
        let mut state = FockStateVector::zero(self.modes, cutoff);
        for (l_tuple, c) in &self.coeffs[n] {
            for n_tuple in tuples(period, self.modes) {
                if n_tuple.iter().sum::<usize>() % period != n {
                    continue;
                }
                self.check_levels(l_tuple, &n_tuple, cutoff)?;
                let occ: Vec<usize> = l_tuple
                    .iter()
                    .zip(&n_tuple)
                    .map(|(&l, &m)| l * period + m)
                    .collect();
                state.amplitudes[index_of(&occ, cutoff)] += prefactor * c;
            }
        }
        Ok(state)
    }

    /// Build the product-index eigenstate `|Ψ_n⟩` for a full index tuple
    /// (no modular constraint, no prefactor); the coefficients of the
    /// tuple's class `⌈Σ_j n_j⌉` are used.
    pub fn product_eigenstate(
        &self,
        n_tuple: &[usize],
        cutoff: usize,
    ) -> Result<FockStateVector, OracleError> {
        if n_tuple.len() != self.modes {
            return Err(OracleError::DimensionMismatch {
                left: n_tuple.len(),
                right: self.modes,
            });
        }
        let period = self.truncation + 1;
        if let Some(&bad) = n_tuple.iter().find(|&&n| n > self.truncation) {
            return Err(OracleError::OutcomeOutOfRange {
                value: bad,
                truncation: self.truncation,
            });
        }
        let class = n_tuple.iter().sum::<usize>() % period;
        let mut state = FockStateVector::zero(self.modes, cutoff);
        for (l_tuple, c) in &self.coeffs[class] {
            self.check_levels(l_tuple, n_tuple, cutoff)?;
            let occ: Vec<usize> = l_tuple
                .iter()
                .zip(n_tuple)
                .map(|(&l, &m)| l * period + m)
                .collect();
            state.amplitudes[index_of(&occ, cutoff)] += *c;
        }
        Ok(state)
    }
}

/// All tuples of the given length with entries in `0..base`.
pub(crate) fn tuples(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..base).map(move |digit| {
                    let mut next = prefix.clone();
                    next.push(digit);
                    next
                })
            })
            .collect();
    }
    out
}

/// A density operator on a truncated multi-mode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    modes: usize,
    cutoff: usize,
    mat: ComplexMatrix,
}

impl DensityOperator {
    pub(crate) fn from_matrix(modes: usize, cutoff: usize, mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.rows(), cutoff.pow(modes as u32));
        debug_assert!(mat.is_square());
        Self { modes, cutoff, mat }
    }

    /// Weighted sum `Σ_i w_i |ψ_i⟩⟨ψ_i|` of projectors.
    ///
    /// The weights are used as given, so the trace equals their sum; pass a
    /// normalized distribution for a unit-trace state.
    pub fn from_weighted_states(
        states: &[FockStateVector],
        weights: &[f64],
    ) -> Result<Self, OracleError> {
        if states.is_empty() || states.len() != weights.len() {
            return Err(OracleError::DimensionMismatch {
                left: states.len(),
                right: weights.len(),
            });
        }
        let (modes, cutoff) = (states[0].modes(), states[0].cutoff());
        let dim = states[0].dim();
        let mut mat = ComplexMatrix::zeros(dim, dim);
        for (state, &w) in states.iter().zip(weights) {
            if state.dim() != dim {
                return Err(OracleError::DimensionMismatch {
                    left: state.dim(),
                    right: dim,
                });
            }
            mat.add_scaled(&state.density().mat, w);
        }
        Ok(Self { modes, cutoff, mat })
    }

    /// Diagonal mixture `Σ_n w_n |Ψ_n⟩⟨Ψ_n|` in the eigenstate family.
    pub fn from_eigen_mixture(
        spec: &EigenstateSpec,
        weights: &crate::mixture::MixtureState,
        cutoff: usize,
    ) -> Result<Self, OracleError> {
        if weights.truncation() != spec.truncation() {
            return Err(OracleError::DimensionMismatch {
                left: weights.truncation(),
                right: spec.truncation(),
            });
        }
        let states: Vec<FockStateVector> = (0..=spec.truncation())
            .map(|n| spec.eigenstate(n, cutoff))
            .collect::<Result<_, _>>()?;
        Self::from_weighted_states(&states, weights.probs())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Tensor product; `self` holds the leading modes.
    pub fn tensor(&self, other: &Self) -> Result<Self, OracleError> {
        if self.cutoff != other.cutoff {
            return Err(OracleError::DimensionMismatch {
                left: self.cutoff,
                right: other.cutoff,
            });
        }
        Ok(Self {
            modes: self.modes + other.modes,
            cutoff: self.cutoff,
            mat: self.mat.kron(&other.mat),
        })
    }

    /// Check Hermiticity, unit trace, and positivity within tolerances.
    pub fn validate(&self) -> Result<(), OracleError> {
        let defect = self.mat.hermiticity_defect();
        if defect > 1e-10 {
            return Err(OracleError::NotHermitian(defect));
        }
        let trace = self.trace();
        if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(OracleError::NotUnitTrace(trace.re));
        }
        let (values, _) = self.mat.hermitian_eigen();
        if let Some(&worst) = values.first() {
            if worst < -1e-10 {
                return Err(OracleError::NotPositive(worst));
            }
        }
        Ok(())
    }

    /// Expectation `⟨ψ|ρ|ψ⟩` for a pure reference state.
    pub fn overlap_with_pure(&self, state: &FockStateVector) -> f64 {
        let amps = state.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            if amps[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..self.dim() {
                acc += amps[i].conj() * self.mat[(i, j)] * amps[j];
            }
        }
        acc.re
    }
}

/// Uhlmann fidelity `F(a, b) = (Tr √(√a b √a))²`, clamped to `[0, 1]`.
///
/// For a pure first argument this reduces to `⟨ψ|b|ψ⟩`; for commuting
/// diagonal states to `(Σ_n √(P_n Q_n))²`.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64, OracleError> {
    if a.dim() != b.dim() {
        return Err(OracleError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let root = a.mat.hermitian_sqrt();
    let inner = root.mul(&b.mat).mul(&root).symmetrized();
    let (values, _) = inner.hermitian_eigen();
    let trace_sqrt: f64 = values.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok((trace_sqrt * trace_sqrt).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixtureState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn index_round_trip() {
        for index in 0..16 {
            assert_eq!(index_of(&occupations_of(index, 2, 4), 4), index);
        }
        assert_eq!(index_of(&[1, 2], 4), 6);
        assert_eq!(occupations_of(6, 2, 4), vec![1, 2]);
    }

    #[test]
    fn ground_family_single_mode_is_fock_basis() {
        // One mode: |Ψ_n⟩ = Σ_l c_l |l(M+1)+n⟩ with unit prefactor.
        let spec = EigenstateSpec::ground(2, 1);
        for n in 0..=2 {
            let state = spec.eigenstate(n, 6).unwrap();
            let expected = FockStateVector::basis_state(1, 6, &[n]).unwrap();
            assert!((state.inner(&expected).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_mode_ground_family_matches_bell_like_forms() {
        // M = 1, N = 2, support at l = (0,0): maximally entangled pairs.
        let spec = EigenstateSpec::ground(1, 2);
        let cutoff = 4;
        let psi0 = spec.eigenstate(0, cutoff).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((psi0.amplitude(&[0, 0]).re - inv_sqrt2).abs() < 1e-14);
        assert!((psi0.amplitude(&[1, 1]).re - inv_sqrt2).abs() < 1e-14);
        assert!(psi0.amplitude(&[0, 1]).norm() < 1e-14);

        let psi1 = spec.eigenstate(1, cutoff).unwrap();
        assert!((psi1.amplitude(&[0, 1]).re - inv_sqrt2).abs() < 1e-14);
        assert!((psi1.amplitude(&[1, 0]).re - inv_sqrt2).abs() < 1e-14);
        assert!(psi1.amplitude(&[0, 0]).norm() < 1e-14);
    }

    #[test]
    fn random_eigenstates_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for &(truncation, modes) in &[(1usize, 1usize), (1, 2), (2, 2), (3, 1)] {
            let spec = EigenstateSpec::random(truncation, modes, 1, &mut rng);
            let cutoff = spec.required_cutoff();
            let states: Vec<FockStateVector> = (0..=truncation)
                .map(|n| spec.eigenstate(n, cutoff).unwrap())
                .collect();
            for (i, a) in states.iter().enumerate() {
                for (j, b) in states.iter().enumerate() {
                    let overlap = a.inner(b).norm();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (overlap - expected).abs() < 1e-12,
                        "⟨Ψ_{i}|Ψ_{j}⟩ = {overlap} (M={truncation}, N={modes})"
                    );
                }
            }
        }
    }

    #[test]
    fn product_eigenstates_are_orthonormal_and_match_single_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let spec = EigenstateSpec::random(1, 2, 1, &mut rng);
        let cutoff = 4;
        let all = tuples(2, 2);
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let sa = spec.product_eigenstate(a, cutoff).unwrap();
                let sb = spec.product_eigenstate(b, cutoff).unwrap();
                let overlap = sa.inner(&sb).norm();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((overlap - expected).abs() < 1e-12);
            }
        }

        // One mode: product and modular constructions coincide.
        let single = EigenstateSpec::random(2, 1, 1, &mut rng);
        for n in 0..=2 {
            let a = single.eigenstate(n, 6).unwrap();
            let b = single.product_eigenstate(&[n], 6).unwrap();
            assert!((a.inner(&b).norm() - 1.0).abs() < 1e-12);
        }

        // The basis-like case: l-support {(0,0)} sends (0,1) to |01⟩.
        let ground = EigenstateSpec::ground(1, 2);
        let state = ground.product_eigenstate(&[0, 1], 4).unwrap();
        assert!((state.amplitude(&[0, 1]).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cutoff_overflow_names_the_offending_mode() {
        let spec = EigenstateSpec::new(
            1,
            2,
            vec![
                vec![(vec![0, 1], Complex64::new(1.0, 0.0))],
                vec![(vec![0, 0], Complex64::new(1.0, 0.0))],
            ],
        )
        .unwrap();
        // Mode 1 needs level 1·2 + n ≥ 2; cutoff 2 cannot hold it.
        match spec.eigenstate(0, 2) {
            Err(OracleError::CutoffOverflow {
                mode: 1,
                occupation,
                cutoff: 2,
            }) => {
                assert!(occupation >= 2);
            }
            other => panic!("expected cutoff overflow on mode 1, got {other:?}"),
        }
    }

    #[test]
    fn spec_validation_rejects_unnormalized_coefficients() {
        let result = EigenstateSpec::new(0, 1, vec![vec![(vec![0], Complex64::new(0.5, 0.0))]]);
        assert!(matches!(
            result,
            Err(OracleError::UnnormalizedCoefficients { n: 0, .. })
        ));
    }

    #[test]
    fn mode_transfer_round_trips_and_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let mut state = FockStateVector::zero(3, 3);
        for a in state.amplitudes_mut() {
            *a = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        }
        let state = state.normalized();
        let shuffled = state.mode_transfer(0, 2).unwrap();
        let back = shuffled.mode_transfer(0, 2).unwrap();
        assert!(state
            .amplitudes()
            .iter()
            .zip(back.amplitudes())
            .all(|(a, b)| (a - b).norm() < 1e-15));

        // ⟨φ| I_{jk} ψ⟩ = ⟨I_{kj} φ | ψ⟩ on random states.
        let mut other = FockStateVector::zero(3, 3);
        for a in other.amplitudes_mut() {
            *a = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        }
        let other = other.normalized();
        let lhs = other.inner(&state.mode_transfer(1, 2).unwrap());
        let rhs = other.mode_transfer(2, 1).unwrap().inner(&state);
        assert!((lhs - rhs).norm() < 1e-14);

        // Basis-state semantics: occupations swap.
        let basis = FockStateVector::basis_state(3, 3, &[2, 0, 1]).unwrap();
        let moved = basis.mode_transfer(0, 1).unwrap();
        assert!((moved.amplitude(&[0, 2, 1]).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_operators_validate() {
        let spec = EigenstateSpec::ground(1, 2);
        let weights = MixtureState::new(vec![0.7, 0.3]).unwrap();
        let rho = DensityOperator::from_eigen_mixture(&spec, &weights, 4).unwrap();
        rho.validate().unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);

        // Unnormalized weights keep their trace.
        let states = vec![
            spec.eigenstate(0, 4).unwrap(),
            spec.eigenstate(1, 4).unwrap(),
        ];
        let skewed = DensityOperator::from_weighted_states(&states, &[0.7, 0.1]).unwrap();
        assert!((skewed.trace().re - 0.8).abs() < 1e-12);
        assert!(skewed.validate().is_err());
    }

    #[test]
    fn fidelity_special_cases() {
        let spec = EigenstateSpec::ground(1, 1);
        let psi0 = spec.eigenstate(0, 2).unwrap();
        let psi1 = spec.eigenstate(1, 2).unwrap();

        let a = psi0.density();
        let b = psi1.density();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&a, &b).unwrap() < 1e-12);

        // Commuting diagonal mixtures: (Σ √(P_n Q_n))².
        let states = vec![psi0.clone(), psi1.clone()];
        let p = [0.7, 0.3];
        let q = [0.4, 0.6];
        let rho = DensityOperator::from_weighted_states(&states, &p).unwrap();
        let sigma = DensityOperator::from_weighted_states(&states, &q).unwrap();
        let expected: f64 = p
            .iter()
            .zip(&q)
            .map(|(x, y)| (x * y).sqrt())
            .sum::<f64>()
            .powi(2);
        assert!((fidelity(&rho, &sigma).unwrap() - expected).abs() < 1e-12);

        // Pure against mixed: ⟨ψ|ρ|ψ⟩.
        assert!((fidelity(&a, &rho).unwrap() - 0.7).abs() < 1e-12);
        assert!((rho.overlap_with_pure(&psi0) - 0.7).abs() < 1e-12);
    }

    /// Random density operator with a generic (non-commuting) eigenbasis.
    fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> DensityOperator {
        let raw = ComplexMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
        });
        let psd = raw.adjoint().mul(&raw);
        let trace = psd.trace().re;
        let mat = psd.scale(Complex64::new(1.0 / trace, 0.0)).symmetrized();
        DensityOperator::from_matrix(1, dim, mat)
    }

    #[test]
    fn fidelity_is_symmetric_and_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        for _ in 0..10 {
            let dim = 6;
            let a = random_density(dim, &mut rng);
            let b = random_density(dim, &mut rng);
            a.validate().unwrap();

            let ab = fidelity(&a, &b).unwrap();
            let ba = fidelity(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-11, "{ab} vs {ba}");
            assert!((0.0..=1.0).contains(&ab));

            // Conjugating both states by the same unitary (eigenvectors of a
            // random Hermitian matrix) leaves the fidelity unchanged.
            let herm = ComplexMatrix::from_fn(dim, dim, |_, _| {
                Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
            })
            .symmetrized();
            let (_, unitary) = herm.hermitian_eigen();
            let rotate = |x: &DensityOperator| {
                DensityOperator::from_matrix(
                    1,
                    dim,
                    unitary
                        .mul(x.matrix())
                        .mul(&unitary.adjoint())
                        .symmetrized(),
                )
            };
            let rotated = fidelity(&rotate(&a), &rotate(&b)).unwrap();
            assert!((rotated - ab).abs() < 1e-10, "{rotated} vs {ab}");
        }
    }
}
