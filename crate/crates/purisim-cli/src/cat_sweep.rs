//! `cat-sweep`: stationary bounds and efficiency thresholds of the damped
//! purity recursion over (r, η_F) grids.

use anyhow::{bail, Result};
use serde_json::{json, Value};

use purisim::catloss::{min_feedback_efficiency, required_efficiency, stationary_bounds};

use crate::common::{fmt_f64, parse_grid, render_csv, render_jsonl, Header, OutputFormat, Sink};
use crate::{CatSweepArgs, Outcome};

pub(crate) fn run(args: &CatSweepArgs) -> Result<Outcome> {
    let format = OutputFormat::parse(&args.format)?;
    let purities = parse_grid(&args.r_grid)?;
    let efficiencies = parse_grid(&args.eta_f_grid)?;
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        bail!("--epsilon must lie in (0, 1), got {}", args.epsilon);
    }
    if let Some(bad) = purities.iter().find(|r| r.abs() > 1.0) {
        bail!("purity grid entry {bad} is outside [-1, 1]");
    }
    if let Some(bad) = efficiencies.iter().find(|eta| **eta <= 0.0 || **eta > 1.0) {
        bail!("efficiency grid entry {bad} is outside (0, 1]");
    }

    let mut rows = Vec::new();
    for &r in &purities {
        for &eta in &efficiencies {
            let eta_min = min_feedback_efficiency(r);
            let eta_required = required_efficiency(r, args.epsilon).expect("validated inputs");
            // r = 0 leaves the per-step map defined (pure damping) but the
            // stationary bounds singular; emit blanks with a flag.
            let (low, high, flag) = if r == 0.0 {
                (None, None, "degenerate")
            } else {
                let (low, high) = stationary_bounds(r, eta).expect("validated inputs");
                (Some(low), Some(high), "")
            };
            rows.push(SweepRow {
                r,
                eta,
                low,
                high,
                eta_min,
                eta_required,
                flag,
            });
        }
    }

    let header = Header::new("cat-sweep", None, canonical_args(args));
    let text = match format {
        OutputFormat::Csv => {
            let rendered: Vec<Vec<String>> = rows.iter().map(SweepRow::csv).collect();
            render_csv(
                &header,
                &[
                    "r",
                    "eta_f",
                    "r_low",
                    "r_high",
                    "eta_min",
                    "eta_required",
                    "flag",
                ],
                &rendered,
            )
        }
        OutputFormat::JsonLines => {
            let rendered: Vec<Value> = rows.iter().map(SweepRow::json).collect();
            render_jsonl(&header, &rendered)
        }
    };
    Sink::from_option(&args.out).write(&text)?;
    Ok(Outcome::Success)
}

struct SweepRow {
    r: f64,
    eta: f64,
    low: Option<f64>,
    high: Option<f64>,
    eta_min: f64,
    eta_required: f64,
    flag: &'static str,
}

impl SweepRow {
    fn csv(&self) -> Vec<String> {
        vec![
            fmt_f64(self.r),
            fmt_f64(self.eta),
            self.low.map(fmt_f64).unwrap_or_default(),
            self.high.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.eta_min),
            fmt_f64(self.eta_required),
            self.flag.to_string(),
        ]
    }

    fn json(&self) -> Value {
        json!({
            "r": self.r,
            "eta_f": self.eta,
            "r_low": self.low,
            "r_high": self.high,
            "eta_min": self.eta_min,
            "eta_required": self.eta_required,
            "flag": self.flag,
        })
    }
}

fn canonical_args(args: &CatSweepArgs) -> Vec<String> {
    vec![
        "--r-grid".into(),
        args.r_grid.clone(),
        "--etaF-grid".into(),
        args.eta_f_grid.clone(),
        "--epsilon".into(),
        fmt_f64(args.epsilon),
        "--format".into(),
        args.format.clone(),
    ]
}
