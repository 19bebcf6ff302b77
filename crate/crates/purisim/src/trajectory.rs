//! Seeded Monte Carlo simulation of purification runs.
//!
//! A trajectory iterates the engine with outcomes sampled from the current
//! outcome distribution, recording the entropy after every cycle. Ensembles
//! run many trajectories on independent RNG streams derived from
//! `(seed, run index)`, so results are bit-identical regardless of worker
//! count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mixture::{BinaryEvent, EventRecord, MixtureError, MixtureState, PROB_FLOOR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("stop_purity {0} is outside (0, 1]")]
    StopPurityOutOfRange(f64),
    #[error("an ensemble needs at least one run")]
    ZeroRuns,
    #[error("an ensemble needs at least one worker")]
    ZeroWorkers,
    #[error("event {outcome} at step {step} has vanishing probability")]
    ImpossibleEvent { step: usize, outcome: String },
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Detection granularity of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetectionMode {
    /// Resolve the full outcome index `k ∈ [0, M]`.
    FullK,
    /// Discriminate only `k = 0` from its complement.
    Binary,
}

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub seed: u64,
    pub max_steps: usize,
    pub mode: DetectionMode,
    /// Declare the run purified once `max_n P_n` reaches this threshold.
    pub stop_purity: f64,
    pub source: MixtureState,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.max_steps == 0 {
            return Err(TrajectoryError::ZeroMaxSteps);
        }
        if !(self.stop_purity > 0.0 && self.stop_purity <= 1.0) {
            return Err(TrajectoryError::StopPurityOutOfRange(self.stop_purity));
        }
        Ok(())
    }
}

/// Ordered detection events of one run, at the granularity it was run with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DetectionRecord {
    FullK(EventRecord),
    Binary(Vec<BinaryEvent>),
}

impl DetectionRecord {
    pub fn len(&self) -> usize {
        match self {
            DetectionRecord::FullK(record) => record.len(),
            DetectionRecord::Binary(events) => events.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryResult {
    pub record: DetectionRecord,
    /// Entropy in nats before the first step and after each step.
    pub entropy_trace: Vec<f64>,
    pub final_state: MixtureState,
    /// Index the run purified onto, if the stop threshold was reached.
    pub purified_index: Option<usize>,
}

impl TrajectoryResult {
    pub fn steps(&self) -> usize {
        self.entropy_trace.len() - 1
    }
}

/// Per-run statistics of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub runs: usize,
    /// Runs purified onto each index; sums to the number of purified runs.
    pub purified_histogram: Vec<u64>,
    pub fraction_purified: f64,
    /// Mean steps over purified runs; `None` when no run purified.
    pub mean_steps_to_purity: Option<f64>,
}

/// The RNG stream for one run of an ensemble.
fn rng_for_run(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Index the run purified onto, if the threshold is reached.
///
/// A threshold of exactly 1 demands an exactly pure distribution: after
/// renormalization the largest weight rounds to 1.0 long before the others
/// underflow, so `max ≥ 1.0` alone would stop runs that still carry weight
/// elsewhere.
fn purified_at(state: &MixtureState, stop_purity: f64) -> Option<usize> {
    let (arg, max) = state.max_component();
    let reached = if stop_purity < 1.0 {
        max >= stop_purity
    } else {
        state.probs().iter().filter(|&&p| p > 0.0).count() == 1
    };
    reached.then_some(arg)
}

/// Draw an outcome `k` from the full outcome distribution.
///
/// Outcomes below the probability floor are never drawn, so they can safely
/// be fed back into `step`.
pub fn sample_outcome<R: Rng>(
    state: &MixtureState,
    source: &MixtureState,
    rng: &mut R,
) -> Result<usize, MixtureError> {
    let dist = state.outcome_distribution(source)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_live = None;
    for (k, &pk) in dist.iter().enumerate() {
        if pk < PROB_FLOOR {
            continue;
        }
        acc += pk;
        last_live = Some(k);
        if u < acc {
            return Ok(k);
        }
    }
    // Rounding pushed the cumulative sum just below 1; take the last live bin.
    Ok(last_live.expect("outcome distribution sums to one"))
}

/// Draw a binary event from `p(0)`.
pub fn sample_binary_event<R: Rng>(
    state: &MixtureState,
    source: &MixtureState,
    rng: &mut R,
) -> Result<BinaryEvent, MixtureError> {
    let p0 = state.binary_outcome_prob(source)?;
    let u: f64 = rng.gen();
    if p0 >= PROB_FLOOR && (u < p0 || 1.0 - p0 < PROB_FLOOR) {
        Ok(BinaryEvent::Zero)
    } else {
        Ok(BinaryEvent::NotZero)
    }
}

fn run_with_rng(config: &TrajectoryConfig, rng: &mut ChaCha8Rng) -> TrajectoryResult {
    let source = &config.source;
    let mut state = source.clone();
    let mut entropy_trace = vec![state.von_neumann_entropy()];
    let mut full_events = EventRecord::empty(source.truncation());
    let mut binary_events = Vec::new();
    let mut purified_index = None;

    if let Some(arg) = purified_at(&state, config.stop_purity) {
        purified_index = Some(arg);
    } else {
        for _ in 0..config.max_steps {
            state = match config.mode {
                DetectionMode::FullK => {
                    let k = sample_outcome(&state, source, rng)
                        .expect("config validated: truncations match");
                    full_events.push(k).expect("sampled outcome is in range");
                    state
                        .step(source, k)
                        .expect("sampled outcome has probability above the floor")
                }
                DetectionMode::Binary => {
                    let event = sample_binary_event(&state, source, rng)
                        .expect("config validated: truncations match");
                    binary_events.push(event);
                    state
                        .binary_step(source, event)
                        .expect("sampled event has probability above the floor")
                }
            };
            entropy_trace.push(state.von_neumann_entropy());
            if let Some(arg) = purified_at(&state, config.stop_purity) {
                purified_index = Some(arg);
                break;
            }
        }
    }

    let record = match config.mode {
        DetectionMode::FullK => DetectionRecord::FullK(full_events),
        DetectionMode::Binary => DetectionRecord::Binary(binary_events),
    };
    TrajectoryResult {
        record,
        entropy_trace,
        final_state: state,
        purified_index,
    }
}

/// Run a single seeded trajectory (the ensemble's run 0).
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<TrajectoryResult, TrajectoryError> {
    run_indexed_trajectory(config, 0)
}

/// Run the trajectory owning ensemble stream `run`, with its full trace.
pub fn run_indexed_trajectory(
    config: &TrajectoryConfig,
    run: u64,
) -> Result<TrajectoryResult, TrajectoryError> {
    config.validate()?;
    let mut rng = rng_for_run(config.seed, run);
    Ok(run_with_rng(config, &mut rng))
}

/// Deterministically replay an explicit full-outcome record.
pub fn force_record(
    source: &MixtureState,
    record: &EventRecord,
) -> Result<TrajectoryResult, TrajectoryError> {
    let mut state = source.clone();
    let mut entropy_trace = vec![state.von_neumann_entropy()];
    for (step, &k) in record.events().iter().enumerate() {
        state = state
            .step(source, k)
            .map_err(|_| TrajectoryError::ImpossibleEvent {
                step,
                outcome: k.to_string(),
            })?;
        entropy_trace.push(state.von_neumann_entropy());
    }
    Ok(TrajectoryResult {
        record: DetectionRecord::FullK(record.clone()),
        entropy_trace,
        final_state: state,
        purified_index: None,
    })
}

/// Deterministically replay an explicit binary event sequence.
pub fn force_binary_record(
    source: &MixtureState,
    events: &[BinaryEvent],
) -> Result<TrajectoryResult, TrajectoryError> {
    let mut state = source.clone();
    let mut entropy_trace = vec![state.von_neumann_entropy()];
    for (step, &event) in events.iter().enumerate() {
        state = state
            .binary_step(source, event)
            .map_err(|_| TrajectoryError::ImpossibleEvent {
                step,
                outcome: format!("{event:?}"),
            })?;
        entropy_trace.push(state.von_neumann_entropy());
    }
    Ok(TrajectoryResult {
        record: DetectionRecord::Binary(events.to_vec()),
        entropy_trace,
        final_state: state,
        purified_index: None,
    })
}

/// Lean per-run statistics, enough to build an [`EnsembleSummary`].
struct RunStat {
    purified_index: Option<usize>,
    steps: usize,
}

fn run_lean(config: &TrajectoryConfig, run: u64) -> RunStat {
    let mut rng = rng_for_run(config.seed, run);
    let source = &config.source;
    let mut state = source.clone();

    if let Some(arg) = purified_at(&state, config.stop_purity) {
        return RunStat {
            purified_index: Some(arg),
            steps: 0,
        };
    }
    for step in 1..=config.max_steps {
        state = match config.mode {
            DetectionMode::FullK => {
                let k = sample_outcome(&state, source, &mut rng)
                    .expect("config validated: truncations match");
                state.step(source, k).expect("sampled outcome is live")
            }
            DetectionMode::Binary => {
                let event = sample_binary_event(&state, source, &mut rng)
                    .expect("config validated: truncations match");
                state
                    .binary_step(source, event)
                    .expect("sampled event is live")
            }
        };
        if let Some(arg) = purified_at(&state, config.stop_purity) {
            return RunStat {
                purified_index: Some(arg),
                steps: step,
            };
        }
    }
    RunStat {
        purified_index: None,
        steps: config.max_steps,
    }
}

/// Run `runs` independent trajectories on `workers` threads.
///
/// Every run owns the RNG stream indexed by its run number, so the summary
/// does not depend on `workers`.
pub fn run_ensemble(
    config: &TrajectoryConfig,
    runs: usize,
    workers: usize,
) -> Result<EnsembleSummary, TrajectoryError> {
    config.validate()?;
    if runs == 0 {
        return Err(TrajectoryError::ZeroRuns);
    }
    if workers == 0 {
        return Err(TrajectoryError::ZeroWorkers);
    }

    let stats: Vec<RunStat> = if workers == 1 {
        (0..runs).map(|i| run_lean(config, i as u64)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool construction");
        pool.install(|| {
            (0..runs)
                .into_par_iter()
                .map(|i| run_lean(config, i as u64))
                .collect()
        })
    };

    let mut histogram = vec![0u64; config.source.dim()];
    let mut purified = 0usize;
    let mut step_total = 0u64;
    // Merge in run order; all reductions are exact integer sums anyway.
    for stat in &stats {
        if let Some(n) = stat.purified_index {
            histogram[n] += 1;
            purified += 1;
            step_total += stat.steps as u64;
        }
    }
    Ok(EnsembleSummary {
        runs,
        purified_histogram: histogram,
        fraction_purified: purified as f64 / runs as f64,
        mean_steps_to_purity: (purified > 0).then(|| step_total as f64 / purified as f64),
    })
}
