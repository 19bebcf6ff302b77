//! `closed-form`: posterior state and probability of a whole detection
//! history, evaluated without iterating.

use anyhow::{anyhow, bail, Result};
use serde_json::json;

use purisim::mixture::{state_from_binary_counts, state_from_counts, BinaryRecord, EventCounts};
use purisim::trajectory::DetectionMode;

use crate::common::{parse_mode, parse_usize_list, resolve_source, Header, Sink};
use crate::{ClosedFormArgs, Outcome};

pub(crate) fn run(args: &ClosedFormArgs) -> Result<Outcome> {
    let source = resolve_source(&args.source, &args.preset)?;
    let mode = parse_mode(&args.mode)?;
    let entries = parse_usize_list(&args.counts)?;

    let (closed, history) = match mode {
        DetectionMode::FullK => {
            if entries.len() != source.state.dim() {
                bail!(
                    "full-mode counts need one entry per outcome: expected {}, got {}",
                    source.state.dim(),
                    entries.len()
                );
            }
            let counts = EventCounts::new(entries.iter().map(|&s| s as u64).collect());
            let closed = state_from_counts(&source.state, &counts).map_err(|e| anyhow!(e))?;
            (
                closed,
                json!({ "counts": entries, "steps": counts.steps() }),
            )
        }
        DetectionMode::Binary => {
            if entries.len() != 2 {
                bail!("binary-mode counts are \"J,Q\" (total steps, zero events)");
            }
            let record =
                BinaryRecord::new(entries[0] as u64, entries[1] as u64).map_err(|e| anyhow!(e))?;
            let closed =
                state_from_binary_counts(&source.state, &record).map_err(|e| anyhow!(e))?;
            (
                closed,
                json!({ "steps": record.steps(), "zeros": record.zeros() }),
            )
        }
    };

    let header = Header::new("closed-form", None, canonical_args(args));
    let report = json!({
        "header": header.to_json(),
        "source": source.state.probs(),
        "mode": args.mode,
        "history": history,
        "posterior": closed.state.probs(),
        "probability": closed.probability,
        "log_probability": closed.log_probability,
        "entropy": closed.state.von_neumann_entropy(),
    });
    Sink::from_option(&args.out).write(&format!("{report:#}\n"))?;
    Ok(Outcome::Success)
}

fn canonical_args(args: &ClosedFormArgs) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(source) = &args.source {
        out.extend(["--source".into(), source.clone()]);
    }
    if let Some(preset) = &args.preset {
        out.extend(["--preset".into(), preset.clone()]);
    }
    out.extend(["--mode".into(), args.mode.clone()]);
    out.extend(["--counts".into(), args.counts.clone()]);
    out
}
