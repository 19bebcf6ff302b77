//! Index-level engine for iterative measurement-driven purification.
//!
//! States are mixtures of `M + 1` mutually orthogonal eigenstates and are
//! represented purely by their diagonal weight vector `P_0, ..., P_M`. A
//! detection event `k` reweights the mixture multiplicatively,
//!
//! ```text
//! P'_n = P_n p_⌈n−k⌉ / p(k),      p(k) = Σ_n P_n p_⌈n−k⌉,
//! ```
//!
//! where `p_n` are the weights of the fresh source copy consumed by the step
//! and `⌈·⌉` is reduction modulo `M + 1`. Iterating over random outcomes is a
//! multiplicative random walk on the probability simplex that eventually
//! concentrates all weight on a single index. This module provides the single
//! step, its binary (`k = 0` vs `k ≠ 0`) coarse-graining, closed forms for
//! whole detection histories, and the von Neumann entropy used to monitor
//! progress.
//!
//! Closed-form history weights involve products like `p_n^{s_l}` that
//! underflow `f64` for histories of a few hundred steps, so they are evaluated
//! in log space; exact zeros are kept out of the logarithms and handled as
//! annihilated terms.

use serde::Serialize;
use thiserror::Error;

/// Outcomes whose probability falls below this floor are treated as
/// impossible rather than producing denormal posterior states.
pub const PROB_FLOOR: f64 = 1e-300;

/// Errors from mixture construction and purification steps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("weight {value} at index {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}; a mixture needs positive total weight")]
    UnnormalizableWeights { sum: f64 },
    #[error("truncation order mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },
    #[error("index {index} exceeds truncation order {truncation}")]
    IndexOutOfRange { index: usize, truncation: usize },
    #[error("outcome k = {outcome} has probability below {PROB_FLOOR:e}")]
    ImpossibleOutcome { outcome: usize },
    #[error("binary event {event:?} has probability below {PROB_FLOOR:e}")]
    ImpossibleBinaryEvent { event: BinaryEvent },
    #[error("event history is impossible under this source: every posterior weight vanishes")]
    ImpossibleHistory,
    #[error("binary record has {zeros} zero events but only {steps} steps")]
    InvalidBinaryRecord { steps: u64, zeros: u64 },
}

/// Reduce `m` modulo `M + 1`, non-negative also for negative `m`.
pub fn mod_index(m: i64, truncation: usize) -> usize {
    let period = truncation as i64 + 1;
    m.rem_euclid(period) as usize
}

/// Binary coarse-graining of the detection outcomes: `k = 0` or its
/// complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinaryEvent {
    Zero,
    NotZero,
}

/// A mixture of `M + 1` orthogonal eigenstates, stored as its diagonal
/// weights.
///
/// Weights are non-negative and sum to one; constructors normalize by the
/// computed sum, and every step renormalizes the same way to bound drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureState {
    probs: Vec<f64>,
}

impl MixtureState {
    /// Build a mixture from non-negative weights, normalizing them.
    pub fn new(weights: Vec<f64>) -> Result<Self, MixtureError> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(MixtureError::InvalidWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(MixtureError::UnnormalizableWeights { sum });
        }
        let probs = weights.iter().map(|w| w / sum).collect();
        Ok(Self { probs })
    }

    /// The pure state concentrated on index `n`.
    pub fn pure(n: usize, truncation: usize) -> Result<Self, MixtureError> {
        if n > truncation {
            return Err(MixtureError::IndexOutOfRange {
                index: n,
                truncation,
            });
        }
        let mut probs = vec![0.0; truncation + 1];
        probs[n] = 1.0;
        Ok(Self { probs })
    }

    /// The equipartition `P_n = 1/(M+1)`, the fixed point under which no
    /// measurement gains information.
    pub fn equipartition(truncation: usize) -> Self {
        let dim = truncation + 1;
        Self {
            probs: vec![1.0 / dim as f64; dim],
        }
    }

    /// Weights `P_n ∝ ratio^n` for `n = 0..=M`.
    pub fn geometric(ratio: f64, truncation: usize) -> Result<Self, MixtureError> {
        if !ratio.is_finite() || ratio <= 0.0 {
            return Err(MixtureError::InvalidWeight {
                index: 0,
                value: ratio,
            });
        }
        let mut weights = Vec::with_capacity(truncation + 1);
        let mut w = 1.0;
        for _ in 0..=truncation {
            weights.push(w);
            w *= ratio;
        }
        Self::new(weights)
    }

    /// Truncation order `M`.
    pub fn truncation(&self) -> usize {
        self.probs.len() - 1
    }

    /// Number of components, `M + 1`.
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs[n]
    }

    /// Index and weight of the largest component.
    pub fn max_component(&self) -> (usize, f64) {
        let mut arg = 0;
        let mut max = self.probs[0];
        for (n, &p) in self.probs.iter().enumerate().skip(1) {
            if p > max {
                arg = n;
                max = p;
            }
        }
        (arg, max)
    }

    /// Von Neumann entropy `S = −Σ_n P_n ln P_n` in nats, with `0 ln 0 = 0`.
    pub fn von_neumann_entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }

    fn check_same_truncation(&self, other: &Self) -> Result<(), MixtureError> {
        if self.truncation() != other.truncation() {
            return Err(MixtureError::TruncationMismatch {
                left: self.truncation(),
                right: other.truncation(),
            });
        }
        Ok(())
    }

    /// Distribution `p(k) = Σ_n P_n p_⌈n−k⌉` of the next detection outcome
    /// when a copy of `source` is consumed.
    pub fn outcome_distribution(&self, source: &Self) -> Result<Vec<f64>, MixtureError> {
        self.check_same_truncation(source)?;
        let dim = self.dim();
        let mut dist = vec![0.0; dim];
        for (k, slot) in dist.iter_mut().enumerate() {
            let mut acc = 0.0;
            for n in 0..dim {
                acc +=
                    self.probs[n] * source.probs[mod_index(n as i64 - k as i64, self.truncation())];
            }
            *slot = acc;
        }
        Ok(dist)
    }

    /// One purification step conditioned on outcome `k`:
    /// `P'_n ∝ P_n p_⌈n−k⌉`.
    pub fn step(&self, source: &Self, outcome: usize) -> Result<Self, MixtureError> {
        self.check_same_truncation(source)?;
        if outcome > self.truncation() {
            return Err(MixtureError::IndexOutOfRange {
                index: outcome,
                truncation: self.truncation(),
            });
        }
        let weights: Vec<f64> = (0..self.dim())
            .map(|n| {
                self.probs[n]
                    * source.probs[mod_index(n as i64 - outcome as i64, self.truncation())]
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total < PROB_FLOOR {
            return Err(MixtureError::ImpossibleOutcome { outcome });
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Probability `p(0) = Σ_n P_n p_n` of the binary `Zero` event.
    pub fn binary_outcome_prob(&self, source: &Self) -> Result<f64, MixtureError> {
        self.check_same_truncation(source)?;
        Ok(self
            .probs
            .iter()
            .zip(&source.probs)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// One binary step: `Zero` reweights by `p_n`, `NotZero` by `1 − p_n`.
    pub fn binary_step(&self, source: &Self, event: BinaryEvent) -> Result<Self, MixtureError> {
        self.check_same_truncation(source)?;
        let weights: Vec<f64> = self
            .probs
            .iter()
            .zip(&source.probs)
            .map(|(&big_p, &p)| match event {
                BinaryEvent::Zero => big_p * p,
                BinaryEvent::NotZero => big_p * (1.0 - p),
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total < PROB_FLOOR {
            return Err(MixtureError::ImpossibleBinaryEvent { event });
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Outcome-averaged step `Σ_k p(k) · step(k)`.
    ///
    /// For an observer ignoring the detection results nothing happens: the
    /// average reproduces the input state, so the whole setup acts as a state
    /// guide that only ever increases the observer's knowledge.
    pub fn average_over_outcomes(&self, source: &Self) -> Result<Self, MixtureError> {
        let dist = self.outcome_distribution(source)?;
        let mut acc = vec![0.0; self.dim()];
        for (k, &pk) in dist.iter().enumerate() {
            if pk < PROB_FLOOR {
                continue;
            }
            let stepped = self.step(source, k)?;
            for (slot, &w) in acc.iter_mut().zip(&stepped.probs) {
                *slot += pk * w;
            }
        }
        Self::new(acc)
    }
}

/// Ordered list of detection outcomes `k ∈ [0, M]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    truncation: usize,
    events: Vec<usize>,
}

impl EventRecord {
    pub fn new(truncation: usize, events: Vec<usize>) -> Result<Self, MixtureError> {
        if let Some(&bad) = events.iter().find(|&&k| k > truncation) {
            return Err(MixtureError::IndexOutOfRange {
                index: bad,
                truncation,
            });
        }
        Ok(Self { truncation, events })
    }

    pub fn empty(truncation: usize) -> Self {
        Self {
            truncation,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, outcome: usize) -> Result<(), MixtureError> {
        if outcome > self.truncation {
            return Err(MixtureError::IndexOutOfRange {
                index: outcome,
                truncation: self.truncation,
            });
        }
        self.events.push(outcome);
        Ok(())
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn events(&self) -> &[usize] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Collapse the ordered record into per-outcome counts; the posterior
    /// state depends on the history only through these.
    pub fn counts(&self) -> EventCounts {
        let mut counts = vec![0u64; self.truncation + 1];
        for &k in &self.events {
            counts[k] += 1;
        }
        EventCounts { counts }
    }
}

/// Per-outcome event counts `s_0, ..., s_M` of a detection history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    counts: Vec<u64>,
}

impl EventCounts {
    /// Wrap a counts vector; entry `l` is the number of `k = l` events.
    pub fn new(counts: Vec<u64>) -> Self {
        assert!(!counts.is_empty(), "counts vector must have M + 1 entries");
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn truncation(&self) -> usize {
        self.counts.len() - 1
    }

    /// Total number of steps `j = Σ_l s_l`.
    pub fn steps(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Sufficient statistic `(j, q)` of a binary detection history: total steps
/// and number of `Zero` events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinaryRecord {
    steps: u64,
    zeros: u64,
}

impl BinaryRecord {
    pub fn new(steps: u64, zeros: u64) -> Result<Self, MixtureError> {
        if zeros > steps {
            return Err(MixtureError::InvalidBinaryRecord { steps, zeros });
        }
        Ok(Self { steps, zeros })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn zeros(&self) -> u64 {
        self.zeros
    }
}

/// Posterior state and probability of a whole detection history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormState {
    pub state: MixtureState,
    /// Probability of observing the history (counts, not a specific order);
    /// underflows to 0.0 for very long histories, see `log_probability`.
    pub probability: f64,
    pub log_probability: f64,
}

/// `ln n!` by direct summation; exact enough for the history lengths here.
fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Log-sum-exp over the non-annihilated terms.
fn log_sum_exp(terms: &[Option<f64>]) -> Option<f64> {
    let max = terms
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if max == f64::NEG_INFINITY {
        return None;
    }
    let sum: f64 = terms.iter().flatten().map(|&t| (t - max).exp()).sum();
    Some(max + sum.ln())
}

fn closed_form_from_log_terms(
    log_terms: Vec<Option<f64>>,
    ln_coefficient: f64,
) -> Result<ClosedFormState, MixtureError> {
    let lse = log_sum_exp(&log_terms).ok_or(MixtureError::ImpossibleHistory)?;
    let probs: Vec<f64> = log_terms
        .iter()
        .map(|t| t.map_or(0.0, |ln_w| (ln_w - lse).exp()))
        .collect();
    let log_probability = ln_coefficient + lse;
    Ok(ClosedFormState {
        state: MixtureState::new(probs)?,
        probability: log_probability.exp(),
        log_probability,
    })
}

/// Closed form for a full-outcome history given only its counts:
/// `P_n ∝ p_n Π_l p_⌈n−l⌉^{s_l}` with the multinomial history multiplicity
/// folded into the returned probability.
pub fn state_from_counts(
    source: &MixtureState,
    counts: &EventCounts,
) -> Result<ClosedFormState, MixtureError> {
    if source.truncation() != counts.truncation() {
        return Err(MixtureError::TruncationMismatch {
            left: source.truncation(),
            right: counts.truncation(),
        });
    }
    let dim = source.dim();
    let p = source.probs();
    let log_terms: Vec<Option<f64>> = (0..dim)
        .map(|n| {
            if p[n] == 0.0 {
                return None;
            }
            let mut acc = p[n].ln();
            for (l, &s_l) in counts.counts().iter().enumerate() {
                if s_l == 0 {
                    continue;
                }
                let q = p[mod_index(n as i64 - l as i64, source.truncation())];
                if q == 0.0 {
                    return None;
                }
                acc += s_l as f64 * q.ln();
            }
            Some(acc)
        })
        .collect();
    let ln_multinomial = ln_factorial(counts.steps())
        - counts
            .counts()
            .iter()
            .map(|&s| ln_factorial(s))
            .sum::<f64>();
    closed_form_from_log_terms(log_terms, ln_multinomial)
}

/// Closed form for a binary history `(j, q)`:
/// `P_n ∝ p_n^{q+1} (1 − p_n)^{j−q}` with the binomial multiplicity folded
/// into the returned probability.
pub fn state_from_binary_counts(
    source: &MixtureState,
    record: &BinaryRecord,
) -> Result<ClosedFormState, MixtureError> {
    let j = record.steps();
    let q = record.zeros();
    let log_terms: Vec<Option<f64>> = source
        .probs()
        .iter()
        .map(|&p_n| {
            if p_n == 0.0 {
                return None;
            }
            let mut acc = (q + 1) as f64 * p_n.ln();
            if j > q {
                if p_n >= 1.0 {
                    return None;
                }
                acc += (j - q) as f64 * (-p_n).ln_1p();
            }
            Some(acc)
        })
        .collect();
    let ln_binomial = ln_factorial(j) - ln_factorial(q) - ln_factorial(j - q);
    closed_form_from_log_terms(log_terms, ln_binomial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn assert_states_close(a: &MixtureState, b: &MixtureState, tol: f64) {
        assert_eq!(a.truncation(), b.truncation());
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert_close(*x, *y, tol);
        }
    }

    /// Random point on the probability simplex; optionally with exact zeros.
    fn random_state(rng: &mut ChaCha8Rng, truncation: usize, with_zeros: bool) -> MixtureState {
        let weights: Vec<f64> = (0..=truncation)
            .map(|_| {
                if with_zeros && rng.gen::<f64>() < 0.2 {
                    0.0
                } else {
                    -rng.gen::<f64>().ln()
                }
            })
            .collect();
        MixtureState::new(weights).unwrap_or_else(|_| MixtureState::pure(0, truncation).unwrap())
    }

    #[test]
    fn mod_index_wraps_negatives() {
        assert_eq!(mod_index(5, 2), 2);
        assert_eq!(mod_index(0, 7), 0);
        assert_eq!(mod_index(-1, 2), 2);
        assert_eq!(mod_index(-3, 2), 0);
        assert_eq!(mod_index(7, 0), 0);
    }

    #[test]
    fn constructor_normalizes_and_validates() {
        let s = MixtureState::new(vec![3.0, 1.0]).unwrap();
        assert_close(s.prob(0), 0.75, 1e-15);
        assert_close(s.prob(1), 0.25, 1e-15);
        assert!(matches!(
            MixtureState::new(vec![0.5, -0.1]),
            Err(MixtureError::InvalidWeight { index: 1, .. })
        ));
        assert!(matches!(
            MixtureState::new(vec![0.0, 0.0]),
            Err(MixtureError::UnnormalizableWeights { .. })
        ));
        assert!(MixtureState::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn outcome_distribution_matches_hand_values() {
        let s = MixtureState::new(vec![0.75, 0.25]).unwrap();
        let dist = s.outcome_distribution(&s).unwrap();
        assert_close(dist[0], 0.625, 1e-15);
        assert_close(dist[1], 0.375, 1e-15);

        // Pure signal: the outcome distribution echoes the source weights.
        let pure = MixtureState::pure(0, 1).unwrap();
        let src = MixtureState::new(vec![0.6, 0.4]).unwrap();
        let dist = pure.outcome_distribution(&src).unwrap();
        assert_close(dist[0], 0.6, 1e-15);
        assert_close(dist[1], 0.4, 1e-15);

        // Equipartition source flattens every outcome.
        let any = MixtureState::new(vec![0.5, 0.3, 0.2]).unwrap();
        let flat = MixtureState::equipartition(2);
        for p in any.outcome_distribution(&flat).unwrap() {
            assert_close(p, 1.0 / 3.0, 1e-15);
        }
    }

    #[test]
    fn outcome_distribution_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = rng.gen_range(0..=16);
            let state = random_state(&mut rng, m, true);
            let source = random_state(&mut rng, m, true);
            let total: f64 = state.outcome_distribution(&source).unwrap().iter().sum();
            assert_close(total, 1.0, 1e-12);
        }
    }

    #[test]
    fn step_matches_hand_values() {
        let s = MixtureState::new(vec![0.75, 0.25]).unwrap();
        let out = s.step(&s, 0).unwrap();
        assert_states_close(&out, &MixtureState::new(vec![0.9, 0.1]).unwrap(), 1e-15);
    }

    #[test]
    fn step_rejects_mismatched_truncation() {
        let a = MixtureState::equipartition(2);
        let b = MixtureState::equipartition(3);
        assert!(matches!(
            a.step(&b, 0),
            Err(MixtureError::TruncationMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn step_rejects_impossible_outcome() {
        // Source weight vanishes exactly where the only signal weight sits.
        let state = MixtureState::pure(0, 1).unwrap();
        let source = MixtureState::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            state.step(&source, 0),
            Err(MixtureError::ImpossibleOutcome { outcome: 0 })
        ));
    }

    #[test]
    fn equipartition_source_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let m = rng.gen_range(0..=8);
            let state = random_state(&mut rng, m, false);
            let flat = MixtureState::equipartition(m);
            for k in 0..=m {
                let stepped = state.step(&flat, k).unwrap();
                assert_states_close(&stepped, &state, 1e-12);
            }
            for event in [BinaryEvent::Zero, BinaryEvent::NotZero] {
                if m == 0 && event == BinaryEvent::NotZero {
                    continue; // M = 0 has only the k = 0 outcome
                }
                let stepped = state.binary_step(&flat, event).unwrap();
                assert_states_close(&stepped, &state, 1e-12);
            }
        }
    }

    #[test]
    fn pure_state_is_absorbed() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let m = rng.gen_range(1..=8);
            let n = rng.gen_range(0..=m);
            let pure = MixtureState::pure(n, m).unwrap();
            let source = random_state(&mut rng, m, false);
            let dist = pure.outcome_distribution(&source).unwrap();
            for (k, &pk) in dist.iter().enumerate() {
                if pk < PROB_FLOOR {
                    continue;
                }
                assert_states_close(&pure.step(&source, k).unwrap(), &pure, 1e-15);
            }
            let p0 = pure.binary_outcome_prob(&source).unwrap();
            if p0 > PROB_FLOOR {
                assert_states_close(
                    &pure.binary_step(&source, BinaryEvent::Zero).unwrap(),
                    &pure,
                    1e-15,
                );
            }
            if 1.0 - p0 > PROB_FLOOR {
                assert_states_close(
                    &pure.binary_step(&source, BinaryEvent::NotZero).unwrap(),
                    &pure,
                    1e-15,
                );
            }
        }
    }

    #[test]
    fn binary_ops_match_hand_values() {
        let s = MixtureState::new(vec![0.75, 0.25]).unwrap();
        assert_close(s.binary_outcome_prob(&s).unwrap(), 0.625, 1e-15);
        let zero = s.binary_step(&s, BinaryEvent::Zero).unwrap();
        assert_states_close(&zero, &MixtureState::new(vec![0.9, 0.1]).unwrap(), 1e-15);
        let not_zero = s.binary_step(&s, BinaryEvent::NotZero).unwrap();
        assert_states_close(
            &not_zero,
            &MixtureState::new(vec![0.5, 0.5]).unwrap(),
            1e-15,
        );

        let pure = MixtureState::pure(0, 1).unwrap();
        let src = MixtureState::new(vec![0.6, 0.4]).unwrap();
        assert_close(pure.binary_outcome_prob(&src).unwrap(), 0.6, 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = random_state(&mut rng, 6, false);
        let flat = MixtureState::equipartition(6);
        assert_close(state.binary_outcome_prob(&flat).unwrap(), 1.0 / 7.0, 1e-14);
    }

    #[test]
    fn binary_not_zero_aggregates_nonzero_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let m = rng.gen_range(1..=10);
            let state = random_state(&mut rng, m, false);
            let source = random_state(&mut rng, m, false);
            let dist = state.outcome_distribution(&source).unwrap();
            let not_zero_prob: f64 = dist[1..].iter().sum();
            if not_zero_prob < 1e-12 {
                continue;
            }
            let mut acc = vec![0.0; m + 1];
            for (k, &pk) in dist.iter().enumerate().skip(1) {
                if pk < PROB_FLOOR {
                    continue;
                }
                let stepped = state.step(&source, k).unwrap();
                for (slot, &w) in acc.iter_mut().zip(stepped.probs()) {
                    *slot += pk / not_zero_prob * w;
                }
            }
            let direct = state.binary_step(&source, BinaryEvent::NotZero).unwrap();
            assert_states_close(&direct, &MixtureState::new(acc).unwrap(), 1e-12);
        }
    }

    #[test]
    fn averaging_leaves_the_state_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let m = rng.gen_range(0..=16);
            let state = random_state(&mut rng, m, true);
            let source = random_state(&mut rng, m, true);
            let averaged = state.average_over_outcomes(&source).unwrap();
            assert_states_close(&averaged, &state, 1e-12);
        }
    }

    #[test]
    fn entropy_values() {
        assert_eq!(MixtureState::pure(3, 9).unwrap().von_neumann_entropy(), 0.0);
        assert_close(
            MixtureState::equipartition(1).von_neumann_entropy(),
            std::f64::consts::LN_2,
            1e-15,
        );

        // Truncated geometric weights e^{-n}: direct summation oracle.
        let decay = MixtureState::geometric((-1.0f64).exp(), 100).unwrap();
        let raw: Vec<f64> = (0..=100).map(|n| (-(n as f64)).exp()).collect();
        let z: f64 = raw.iter().sum();
        let expected: f64 = raw.iter().map(|w| -(w / z) * (w / z).ln()).sum();
        assert_close(decay.von_neumann_entropy(), expected, 1e-13);
        assert_close(expected, 1.0407, 1e-3);
    }

    /// Sequential-iteration oracle: fold `step` over an explicit record.
    fn fold_record(source: &MixtureState, events: &[usize]) -> (MixtureState, f64) {
        let mut state = source.clone();
        let mut prob = 1.0;
        for &k in events {
            let dist = state.outcome_distribution(source).unwrap();
            prob *= dist[k];
            state = state.step(source, k).unwrap();
        }
        (state, prob)
    }

    /// Independent multinomial coefficient via a product of binomials.
    fn multinomial(counts: &[u64]) -> f64 {
        let mut total = 0u64;
        let mut acc = 1.0;
        for &s in counts {
            for i in 1..=s {
                total += 1;
                acc *= total as f64 / i as f64;
            }
        }
        acc
    }

    #[test]
    fn closed_form_matches_sequential_folding() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..60 {
            let m = rng.gen_range(1..=8);
            let source = random_state(&mut rng, m, false);
            let steps = rng.gen_range(0..=50);
            let events: Vec<usize> = (0..steps).map(|_| rng.gen_range(0..=m)).collect();
            let record = EventRecord::new(m, events.clone()).unwrap();
            let (folded, ordered_prob) = fold_record(&source, &events);
            let closed = state_from_counts(&source, &record.counts()).unwrap();
            assert_states_close(&closed.state, &folded, 1e-12);
            let expected_prob = multinomial(record.counts().counts()) * ordered_prob;
            if expected_prob > 1e-250 {
                assert!(
                    (closed.probability - expected_prob).abs() <= 1e-10 * expected_prob,
                    "prob {} vs {}",
                    closed.probability,
                    expected_prob
                );
            }
        }
    }

    #[test]
    fn closed_form_depends_only_on_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let source = random_state(&mut rng, 4, false);
        let mut events: Vec<usize> = (0..30).map(|_| rng.gen_range(0..=4)).collect();
        let (reference, _) = fold_record(&source, &events);
        // Arbitrary reordering of the same multiset of events.
        events.reverse();
        events.sort_unstable();
        let (permuted, _) = fold_record(&source, &events);
        assert_states_close(&reference, &permuted, 1e-12);
    }

    #[test]
    fn closed_form_edge_cases() {
        let source = MixtureState::new(vec![0.75, 0.25]).unwrap();

        // Empty history returns the source with probability one.
        let empty = state_from_counts(&source, &EventCounts::new(vec![0, 0])).unwrap();
        assert_states_close(&empty.state, &source, 1e-15);
        assert_close(empty.probability, 1.0, 1e-15);

        // All-zero counts concentrate as p_n^{j+1}.
        let all_zero = state_from_counts(&source, &EventCounts::new(vec![2, 0])).unwrap();
        assert_states_close(
            &all_zero.state,
            &MixtureState::new(vec![27.0 / 28.0, 1.0 / 28.0]).unwrap(),
            1e-14,
        );

        // Impossible history: source is pure but the history demands k = 1.
        let pure = MixtureState::pure(0, 1).unwrap();
        assert!(matches!(
            state_from_counts(&pure, &EventCounts::new(vec![0, 1])),
            Err(MixtureError::ImpossibleHistory)
        ));
    }

    #[test]
    fn binary_closed_form_matches_hand_values() {
        let source = MixtureState::new(vec![0.75, 0.25]).unwrap();
        let record = BinaryRecord::new(2, 2).unwrap();
        let closed = state_from_binary_counts(&source, &record).unwrap();
        assert_states_close(
            &closed.state,
            &MixtureState::new(vec![27.0 / 28.0, 1.0 / 28.0]).unwrap(),
            1e-14,
        );
        assert_close(closed.probability, 0.4375, 1e-14);

        let empty = state_from_binary_counts(&source, &BinaryRecord::new(0, 0).unwrap()).unwrap();
        assert_states_close(&empty.state, &source, 1e-15);
        assert_close(empty.probability, 1.0, 1e-15);

        assert!(BinaryRecord::new(1, 2).is_err());
    }

    #[test]
    fn binary_closed_form_matches_sequential_folding() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..40 {
            let m = rng.gen_range(1..=8);
            let source = random_state(&mut rng, m, false);
            let steps = rng.gen_range(0u64..=50);
            let events: Vec<BinaryEvent> = (0..steps)
                .map(|_| {
                    if rng.gen::<bool>() {
                        BinaryEvent::Zero
                    } else {
                        BinaryEvent::NotZero
                    }
                })
                .collect();
            let zeros = events.iter().filter(|e| **e == BinaryEvent::Zero).count() as u64;

            let mut state = source.clone();
            let mut ordered_prob = 1.0;
            for &event in &events {
                let p0 = state.binary_outcome_prob(&source).unwrap();
                ordered_prob *= match event {
                    BinaryEvent::Zero => p0,
                    BinaryEvent::NotZero => 1.0 - p0,
                };
                state = state.binary_step(&source, event).unwrap();
            }

            let record = BinaryRecord::new(steps, zeros).unwrap();
            let closed = state_from_binary_counts(&source, &record).unwrap();
            assert_states_close(&closed.state, &state, 1e-12);
            let expected = multinomial(&[zeros, steps - zeros]) * ordered_prob;
            if expected > 1e-250 {
                assert!(
                    (closed.probability - expected).abs() <= 1e-10 * expected,
                    "prob {} vs {}",
                    closed.probability,
                    expected
                );
            }
        }
    }

    #[test]
    fn binary_closed_form_handles_pure_source_components() {
        // p_0 = 1 annihilates the (1 - p_n) factor for every NotZero event.
        let source = MixtureState::pure(0, 1).unwrap();
        let closed = state_from_binary_counts(&source, &BinaryRecord::new(3, 3).unwrap()).unwrap();
        assert_states_close(&closed.state, &source, 1e-15);
        assert_close(closed.probability, 1.0, 1e-15);
        assert!(matches!(
            state_from_binary_counts(&source, &BinaryRecord::new(3, 2).unwrap()),
            Err(MixtureError::ImpossibleHistory)
        ));
    }

    #[test]
    fn long_histories_stay_finite_in_log_space() {
        // j = 800 would underflow any linear-space product.
        let source = MixtureState::new(vec![0.75, 0.25]).unwrap();
        let record = BinaryRecord::new(800, 700).unwrap();
        let closed = state_from_binary_counts(&source, &record).unwrap();
        assert!(closed.log_probability.is_finite());
        assert!(closed.state.probs().iter().all(|p| p.is_finite()));
        assert_close(closed.state.probs().iter().sum::<f64>(), 1.0, 1e-12);

        let counts = EventCounts::new(vec![700, 100]);
        let closed = state_from_counts(&source, &counts).unwrap();
        assert!(closed.log_probability.is_finite());
        assert_close(closed.state.probs().iter().sum::<f64>(), 1.0, 1e-12);
    }

    #[test]
    fn normalization_is_preserved_by_every_operation() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..50 {
            let m = rng.gen_range(0..=16);
            let state = random_state(&mut rng, m, true);
            let source = random_state(&mut rng, m, true);
            let dist = state.outcome_distribution(&source).unwrap();
            for (k, &pk) in dist.iter().enumerate() {
                if pk < PROB_FLOOR {
                    continue;
                }
                let sum: f64 = state.step(&source, k).unwrap().probs().iter().sum();
                assert_close(sum, 1.0, 1e-12);
            }
        }
    }
}
