//! `simulate`: seeded Monte Carlo runs (or deterministic replays) emitting
//! per-step entropy traces and a JSON summary.

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use purisim::mixture::{BinaryEvent, EventRecord};
use purisim::trajectory::{
    force_binary_record, force_record, run_indexed_trajectory, DetectionMode, DetectionRecord,
    TrajectoryConfig, TrajectoryResult,
};

use crate::common::{
    fmt_f64, mode_name, parse_mode, render_csv, render_jsonl, resolve_source, summary_path, Header,
    OutputFormat, Sink,
};
use crate::{Outcome, SimulateArgs};

pub(crate) fn run(args: &SimulateArgs) -> Result<Outcome> {
    let format = OutputFormat::parse(&args.format)?;
    let source = resolve_source(&args.source, &args.preset)?;
    let mode = match &args.mode {
        Some(text) => parse_mode(text)?,
        None => source.implied_mode.unwrap_or(DetectionMode::FullK),
    };
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    if args.workers == 0 {
        bail!("--workers must be at least 1");
    }
    let config = TrajectoryConfig {
        seed: args.seed,
        max_steps: args.max_steps,
        mode,
        stop_purity: args.stop_purity,
        source: source.state.clone(),
    };
    config.validate().map_err(|e| anyhow!(e))?;

    let results = if let Some(record_text) = &args.record {
        if args.runs != 1 {
            bail!("--record replays one deterministic run; --runs must be 1");
        }
        vec![replay(&config, mode, record_text)?]
    } else {
        collect_runs(&config, args.runs, args.workers)?
    };

    let header = Header::new("simulate", Some(args.seed), canonical_args(args, mode));
    let trace = match format {
        OutputFormat::Csv => {
            let rows = results
                .iter()
                .enumerate()
                .flat_map(|(run, result)| trace_rows(run, result))
                .collect::<Vec<_>>();
            render_csv(&header, &["run", "step", "entropy", "event"], &rows)
        }
        OutputFormat::JsonLines => {
            let rows = results
                .iter()
                .enumerate()
                .flat_map(|(run, result)| trace_values(run, result))
                .collect::<Vec<_>>();
            render_jsonl(&header, &rows)
        }
    };
    Sink::File(args.out.clone()).write(&trace)?;

    let summary = summarize(&header, &config, &results);
    Sink::File(summary_path(&args.out)).write(&format!("{:#}\n", summary))?;
    Ok(Outcome::Success)
}

/// The argument list that reproduces this computation (destination excluded).
fn canonical_args(args: &SimulateArgs, mode: DetectionMode) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(source) = &args.source {
        out.extend(["--source".into(), source.clone()]);
    }
    if let Some(preset) = &args.preset {
        out.extend(["--preset".into(), preset.clone()]);
    }
    out.extend(["--seed".into(), args.seed.to_string()]);
    out.extend(["--runs".into(), args.runs.to_string()]);
    out.extend(["--max-steps".into(), args.max_steps.to_string()]);
    out.extend(["--stop-purity".into(), fmt_f64(args.stop_purity)]);
    out.extend(["--mode".into(), mode_name(mode).into()]);
    if let Some(record) = &args.record {
        out.extend(["--record".into(), record.clone()]);
    }
    out.extend(["--workers".into(), args.workers.to_string()]);
    out.extend(["--format".into(), args.format.clone()]);
    out
}

fn replay(
    config: &TrajectoryConfig,
    mode: DetectionMode,
    record_text: &str,
) -> Result<TrajectoryResult> {
    match mode {
        DetectionMode::FullK => {
            let events: Vec<usize> = record_text
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|_| anyhow!("cannot parse event {tok:?}"))
                })
                .collect::<Result<_>>()?;
            let record =
                EventRecord::new(config.source.truncation(), events).map_err(|e| anyhow!(e))?;
            force_record(&config.source, &record).map_err(|e| anyhow!(e))
        }
        DetectionMode::Binary => {
            let events: Vec<BinaryEvent> = record_text
                .split(',')
                .map(|tok| match tok.trim().to_ascii_lowercase().as_str() {
                    "zero" => Ok(BinaryEvent::Zero),
                    "notzero" => Ok(BinaryEvent::NotZero),
                    other => Err(anyhow!("binary events are zero/notzero, got {other:?}")),
                })
                .collect::<Result<_>>()?;
            force_binary_record(&config.source, &events).map_err(|e| anyhow!(e))
        }
    }
}

/// Run trajectories on their ensemble streams, optionally on worker threads;
/// results are placed by run index, so the output is worker-independent.
fn collect_runs(
    config: &TrajectoryConfig,
    runs: usize,
    workers: usize,
) -> Result<Vec<TrajectoryResult>> {
    if workers == 1 || runs == 1 {
        return (0..runs)
            .map(|run| run_indexed_trajectory(config, run as u64).map_err(|e| anyhow!(e)))
            .collect();
    }
    let mut slots: Vec<Option<TrajectoryResult>> = vec![None; runs];
    std::thread::scope(|scope| {
        for (worker, chunk) in slots.chunks_mut(runs.div_ceil(workers)).enumerate() {
            let base = worker * runs.div_ceil(workers);
            scope.spawn(move || {
                for (offset, slot) in chunk.iter_mut().enumerate() {
                    *slot = run_indexed_trajectory(config, (base + offset) as u64).ok();
                }
            });
        }
    });
    slots
        .into_iter()
        .enumerate()
        .map(|(run, slot)| slot.ok_or_else(|| anyhow!("run {run} failed")))
        .collect()
}

fn event_label(record: &DetectionRecord, step: usize) -> String {
    if step == 0 {
        return String::new();
    }
    match record {
        DetectionRecord::FullK(events) => events.events()[step - 1].to_string(),
        DetectionRecord::Binary(events) => match events[step - 1] {
            BinaryEvent::Zero => "zero".to_string(),
            BinaryEvent::NotZero => "notzero".to_string(),
        },
    }
}

fn trace_rows(run: usize, result: &TrajectoryResult) -> Vec<Vec<String>> {
    result
        .entropy_trace
        .iter()
        .enumerate()
        .map(|(step, &entropy)| {
            vec![
                run.to_string(),
                step.to_string(),
                fmt_f64(entropy),
                event_label(&result.record, step),
            ]
        })
        .collect()
}

fn trace_values(run: usize, result: &TrajectoryResult) -> Vec<Value> {
    result
        .entropy_trace
        .iter()
        .enumerate()
        .map(|(step, &entropy)| {
            let event = event_label(&result.record, step);
            json!({
                "run": run,
                "step": step,
                "entropy": entropy,
                "event": if event.is_empty() { Value::Null } else { Value::String(event) },
            })
        })
        .collect()
}

fn summarize(header: &Header, config: &TrajectoryConfig, results: &[TrajectoryResult]) -> Value {
    let mut histogram = vec![0u64; config.source.dim()];
    let mut purified = 0usize;
    let mut steps_total = 0u64;
    let per_run: Vec<Value> = results
        .iter()
        .enumerate()
        .map(|(run, result)| {
            if let Some(index) = result.purified_index {
                histogram[index] += 1;
                purified += 1;
                steps_total += result.steps() as u64;
            }
            json!({
                "run": run,
                "steps": result.steps(),
                "purified_index": result.purified_index,
                "final_entropy": result.entropy_trace.last().copied(),
                "final_state": result.final_state.probs(),
            })
        })
        .collect();
    json!({
        "header": header.to_json(),
        "source": config.source.probs(),
        "mode": mode_name(config.mode),
        "stop_purity": config.stop_purity,
        "max_steps": config.max_steps,
        "runs": results.len(),
        "fraction_purified": purified as f64 / results.len() as f64,
        "mean_steps_to_purity": (purified > 0).then(|| steps_total as f64 / purified as f64),
        "purified_histogram": histogram,
        "per_run": per_run,
    })
}
