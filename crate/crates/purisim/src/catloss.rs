//! Two-component cat mixtures under loss and imperfect feedback.
//!
//! The signal family here is the `N`-mode mixture built from `|α⟩ = |α_1⟩ ⋯
//! |α_N⟩` and `|−α⟩`, parametrized by a purity parameter `r ∈ [−1, 1]` and
//! the coherent-state overlap `e = exp(−2|α|²)`. Together these determine an
//! `M = 1` eigenvalue pair, so a purification run reduces to a scalar
//! recursion for the circulating purity `R`. Loss in the feedback path damps
//! `R` by a feedback efficiency `η_F` per cycle; this module provides the
//! damped recursion, its stationary bounds, and the efficiency thresholds
//! they imply.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::mixture::{BinaryEvent, MixtureError, MixtureState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatError {
    #[error("purity parameter {0} is outside [-1, 1] or not finite")]
    PurityOutOfRange(f64),
    #[error("state is degenerate: 1 + r e = {0}, the mixture cannot be normalized")]
    DegenerateMixture(f64),
    #[error("amplitude {index} is not finite")]
    InvalidAmplitude { index: usize },
    #[error("loss rate {value} at mode {index} is negative or not finite")]
    InvalidLossRate { index: usize, value: f64 },
    #[error("transparency length must be positive, got {0}")]
    InvalidTransparencyLength(f64),
    #[error("propagation distance must be non-negative, got {0}")]
    InvalidDistance(f64),
    #[error("channel has {channel} loss rates but the state has {state} modes")]
    ModeCountMismatch { channel: usize, state: usize },
    #[error("feedback efficiency {0} is outside [0, 1]")]
    EfficiencyOutOfRange(f64),
    #[error("overlap {0} is outside [0, 1]")]
    OverlapOutOfRange(f64),
    #[error("event has vanishing probability: recursion denominator {0} ≤ 0")]
    VanishingDenominator(f64),
    #[error("stationary bounds are singular at r = 0")]
    SingularAtZeroPurity,
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("expected an M = 1 mixture, got truncation order {0}")]
    NotTwoComponent(usize),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// An `N`-mode two-component cat mixture: amplitudes `α_j` and purity `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatMixture {
    alphas: Vec<Complex64>,
    purity: f64,
}

impl CatMixture {
    pub fn new(alphas: Vec<Complex64>, purity: f64) -> Result<Self, CatError> {
        if !purity.is_finite() || purity.abs() > 1.0 {
            return Err(CatError::PurityOutOfRange(purity));
        }
        if let Some(index) = alphas
            .iter()
            .position(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(CatError::InvalidAmplitude { index });
        }
        let cat = Self { alphas, purity };
        let denom = 1.0 + purity * cat.overlap();
        if denom <= 0.0 {
            return Err(CatError::DegenerateMixture(denom));
        }
        Ok(cat)
    }

    pub fn modes(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    pub fn purity(&self) -> f64 {
        self.purity
    }

    /// Total intensity `|α|² = Σ_j |α_j|²`.
    pub fn total_intensity(&self) -> f64 {
        self.alphas.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Overlap `e = ⟨α|−α⟩ = exp(−2|α|²)`.
    pub fn overlap(&self) -> f64 {
        (-2.0 * self.total_intensity()).exp()
    }

    /// Eigenvalue pair `(p_0, p_1)` of the mixture,
    /// `p_n = [1 + (−1)ⁿ e][1 + (−1)ⁿ r] / (2(1 + r e))`.
    pub fn eigensystem(&self) -> (f64, f64) {
        eigenvalues(self.purity, self.overlap())
    }

    /// The `M = 1` diagonal representation consumed by the engine.
    pub fn to_mixture(&self) -> MixtureState {
        let (p0, p1) = self.eigensystem();
        MixtureState::new(vec![p0, p1]).expect("eigenvalues are a distribution")
    }
}

fn eigenvalues(purity: f64, overlap: f64) -> (f64, f64) {
    let denom = 2.0 * (1.0 + purity * overlap);
    let p0 = (1.0 + overlap) * (1.0 + purity) / denom;
    let p1 = (1.0 - overlap) * (1.0 - purity) / denom;
    (p0, p1)
}

/// Invert the eigenvalue map: recover `r` from an `M = 1` mixture and the
/// overlap `e`.
pub fn purity_from_mixture(state: &MixtureState, overlap: f64) -> Result<f64, CatError> {
    if state.truncation() != 1 {
        return Err(CatError::NotTwoComponent(state.truncation()));
    }
    check_overlap(overlap)?;
    let p0 = state.prob(0);
    let denom = 1.0 + overlap - 2.0 * p0 * overlap;
    if denom <= 0.0 {
        return Err(CatError::DegenerateMixture(denom));
    }
    Ok((2.0 * p0 - 1.0 - overlap) / denom)
}

/// Per-mode loss rates over a propagation distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossChannel {
    etas: Vec<f64>,
    transparency_length: f64,
    distance: f64,
}

impl LossChannel {
    pub fn new(etas: Vec<f64>, transparency_length: f64, distance: f64) -> Result<Self, CatError> {
        if let Some((index, &value)) = etas
            .iter()
            .enumerate()
            .find(|(_, e)| !e.is_finite() || **e < 0.0)
        {
            return Err(CatError::InvalidLossRate { index, value });
        }
        if transparency_length.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(CatError::InvalidTransparencyLength(transparency_length));
        }
        if distance < 0.0 || !distance.is_finite() {
            return Err(CatError::InvalidDistance(distance));
        }
        Ok(Self {
            etas,
            transparency_length,
            distance,
        })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn transparency_length(&self) -> f64 {
        self.transparency_length
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Mode-averaged loss rate `η = (1/N) Σ_j η_j`.
    pub fn mean_loss(&self) -> f64 {
        self.etas.iter().sum::<f64>() / self.etas.len() as f64
    }
}

/// Propagate a cat mixture through a loss channel.
///
/// Exact: `α_j → α_j e^{−η_j x/L}` and `r → r e^{2(|α(x)|² − |α(0)|²)}`.
/// Approximate (`x ≪ L`): amplitudes untouched,
/// `r → r e^{−4|α(0)|² η x/L}`.
pub fn decohere(
    cat: &CatMixture,
    channel: &LossChannel,
    approximate: bool,
) -> Result<CatMixture, CatError> {
    if channel.etas.len() != cat.modes() {
        return Err(CatError::ModeCountMismatch {
            channel: channel.etas.len(),
            state: cat.modes(),
        });
    }
    let ratio = channel.distance / channel.transparency_length;
    if approximate {
        let factor = (-4.0 * cat.total_intensity() * channel.mean_loss() * ratio).exp();
        return CatMixture::new(cat.alphas.clone(), cat.purity * factor);
    }
    let alphas: Vec<Complex64> = cat
        .alphas
        .iter()
        .zip(&channel.etas)
        .map(|(a, eta)| a * (-eta * ratio).exp())
        .collect();
    let intensity_after: f64 = alphas.iter().map(|a| a.norm_sqr()).sum();
    let factor = (2.0 * (intensity_after - cat.total_intensity())).exp();
    CatMixture::new(alphas, cat.purity * factor)
}

/// How the per-cycle purity recursion treats the coherent-state overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackModel {
    /// Purity damping factor `η_F` applied once per cycle.
    pub efficiency: f64,
    /// Keep the `e`-dependent terms instead of the mesoscopic (`e → 0`) form.
    pub exact_overlap: bool,
}

impl FeedbackModel {
    pub fn new(efficiency: f64, exact_overlap: bool) -> Result<Self, CatError> {
        if !(0.0..=1.0).contains(&efficiency) || !efficiency.is_finite() {
            return Err(CatError::EfficiencyOutOfRange(efficiency));
        }
        Ok(Self {
            efficiency,
            exact_overlap,
        })
    }
}

fn check_purity(value: f64) -> Result<(), CatError> {
    if !value.is_finite() || value.abs() > 1.0 {
        return Err(CatError::PurityOutOfRange(value));
    }
    Ok(())
}

fn check_overlap(value: f64) -> Result<(), CatError> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(CatError::OverlapOutOfRange(value));
    }
    Ok(())
}

/// One damped purity-recursion step.
///
/// Mesoscopic form: `R' = η_F (R ± r) / (1 ± r R)` with `+` for `Zero` and
/// `−` for `NotZero`. The exact form keeps the overlap,
/// `R' = η_F (R + r + e(1 + R r)) / (1 + R r + e(R + r))` for `Zero` and the
/// sign-flipped analogue for `NotZero`; it reduces to the mesoscopic form as
/// `e → 0`.
pub fn purity_step(
    current: f64,
    source: f64,
    event: BinaryEvent,
    model: &FeedbackModel,
    overlap: f64,
) -> Result<f64, CatError> {
    check_purity(current)?;
    check_purity(source)?;
    check_overlap(overlap)?;
    let e = if model.exact_overlap { overlap } else { 0.0 };
    let (num, den) = match event {
        BinaryEvent::Zero => (
            current + source + e * (1.0 + current * source),
            1.0 + current * source + e * (current + source),
        ),
        BinaryEvent::NotZero => (
            current - source - e * (1.0 - current * source),
            1.0 - current * source - e * (current - source),
        ),
    };
    if den <= 0.0 {
        return Err(CatError::VanishingDenominator(den));
    }
    Ok(model.efficiency * num / den)
}

/// Probability of the binary `Zero` event for circulating purity `R` against
/// source purity `r` at overlap `e`; `(1 + R r)/2` in the mesoscopic limit.
pub fn binary_event_prob_cat(current: f64, source: f64, overlap: f64) -> Result<f64, CatError> {
    check_purity(current)?;
    check_purity(source)?;
    check_overlap(overlap)?;
    let (big_p0, big_p1) = eigenvalues(current, overlap);
    let (p0, p1) = eigenvalues(source, overlap);
    Ok(big_p0 * p0 + big_p1 * p1)
}

/// Stationary points `±[√((1−η_F)² + 4r²η_F) − (1−η_F)] / (2|r|)` of the
/// damped recursion; the interval `|R|` can walk in.
pub fn stationary_bounds(source: f64, efficiency: f64) -> Result<(f64, f64), CatError> {
    check_purity(source)?;
    if source == 0.0 {
        return Err(CatError::SingularAtZeroPurity);
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(CatError::EfficiencyOutOfRange(efficiency));
    }
    let loss = 1.0 - efficiency;
    let root =
        ((loss * loss + 4.0 * source * source * efficiency).sqrt() - loss) / (2.0 * source.abs());
    Ok((-root, root))
}

/// Feedback efficiency below which the recursion can never push `|R|` above
/// its starting value `|r|`: `(1 + r²)/2`.
pub fn min_feedback_efficiency(source: f64) -> f64 {
    (1.0 + source * source) / 2.0
}

/// Efficiency needed to keep the upper stationary bound within `ε` of one:
/// `1 − 2ε|r| / (1 + |r|)` (first order in `ε`).
pub fn required_efficiency(source: f64, epsilon: f64) -> Result<f64, CatError> {
    check_purity(source)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CatError::InvalidEpsilon(epsilon));
    }
    Ok(1.0 - 2.0 * epsilon * source.abs() / (1.0 + source.abs()))
}
