//! `oracle-verify`: brute-force network contraction against the index-level
//! engine, plus the single-preparation collapse law.

use anyhow::{bail, Result};
use serde_json::json;

use purisim::oracle::{verify_engine_equivalence, verify_single_instant, VerifyOptions};

use crate::common::{parse_usize_list, Header, Sink};
use crate::{OracleVerifyArgs, Outcome};

/// Largest single-side dimension accepted for a verification case.
const DESK_SCALE_DIM: usize = 4096;

/// Largest joint-matrix entry count the dense contraction may allocate
/// (the joint density matrix holds (cutoff^2N)^2 complex entries).
const JOINT_ENTRY_BUDGET: u128 = 64_000_000;

pub(crate) fn run(args: &OracleVerifyArgs) -> Result<Outcome> {
    let truncations = parse_usize_list(&args.truncations)?;
    let mode_counts = parse_usize_list(&args.modes)?;
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }

    let mut cases = Vec::new();
    let mut all_pass = true;
    for &truncation in &truncations {
        for &modes in &mode_counts {
            if modes == 0 {
                bail!("--N entries must be at least 1");
            }
            let period = truncation + 1;
            let cutoff = args.cutoff.unwrap_or(2 * period);
            if !cutoff.is_multiple_of(period) {
                bail!("cutoff {cutoff} is not a multiple of M+1 = {period}");
            }
            let dim = cutoff.checked_pow(modes as u32).unwrap_or(usize::MAX);
            if dim > DESK_SCALE_DIM {
                bail!(
                    "cutoff^N = {dim} exceeds the desk-scale bound {DESK_SCALE_DIM} \
                     (M={truncation}, N={modes}, cutoff={cutoff})"
                );
            }
            let joint_entries = (dim as u128 * dim as u128).pow(2);
            if joint_entries > JOINT_ENTRY_BUDGET {
                bail!(
                    "the joint contraction for M={truncation}, N={modes}, cutoff={cutoff} \
                     would allocate {joint_entries} matrix entries; reduce N or the cutoff"
                );
            }

            let equivalence = verify_engine_equivalence(
                truncation,
                modes,
                cutoff,
                &VerifyOptions {
                    trials: args.trials,
                    seed: args.seed,
                    tolerance: 1e-9,
                    skip_renormalization: args.skip_renormalization,
                },
            )
            .map_err(|e| anyhow::anyhow!(e))?;
            let single_instant = verify_single_instant(
                truncation,
                modes,
                cutoff,
                &VerifyOptions {
                    trials: args.trials,
                    seed: args.seed,
                    tolerance: 1e-10,
                    skip_renormalization: false,
                },
            )
            .map_err(|e| anyhow::anyhow!(e))?;

            all_pass &= equivalence.pass && single_instant.pass;
            cases.push(json!({
                "truncation": truncation,
                "modes": modes,
                "cutoff": cutoff,
                "equivalence": equivalence,
                "single_instant": single_instant,
            }));
        }
    }

    let header = Header::new("oracle-verify", Some(args.seed), canonical_args(args));
    let report = json!({
        "header": header.to_json(),
        "cases": cases,
        "pass": all_pass,
    });
    Sink::from_option(&args.out).write(&format!("{report:#}\n"))?;
    Ok(if all_pass {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

fn canonical_args(args: &OracleVerifyArgs) -> Vec<String> {
    let mut out = vec![
        "--M".to_string(),
        args.truncations.clone(),
        "--N".to_string(),
        args.modes.clone(),
        "--trials".to_string(),
        args.trials.to_string(),
        "--seed".to_string(),
        args.seed.to_string(),
    ];
    if let Some(cutoff) = args.cutoff {
        out.extend(["--cutoff".into(), cutoff.to_string()]);
    }
    if args.skip_renormalization {
        out.push("--skip-renormalization".into());
    }
    out
}
