//! Shared CLI plumbing: source parsing, grids, headers, and file emission.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

use purisim::mixture::MixtureState;
use purisim::trajectory::DetectionMode;

/// Format a float with 17 significant digits so re-parsing is exact.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::JsonLines),
            other => bail!("unknown format {other:?}; expected csv or jsonl"),
        }
    }
}

/// Reproducibility header embedded at the top of every emitted file.
///
/// `args` is the canonical argument list (destination excluded): running the
/// binary again with exactly these arguments reproduces the file bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub args: Vec<String>,
}

impl Header {
    pub fn new(command: &str, seed: Option<u64>, args: Vec<String>) -> Self {
        Self {
            artifact: "purisim",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            args,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("header serializes")
    }
}

/// Where a command writes its primary output.
pub enum Sink {
    File(PathBuf),
    Stdout,
}

impl Sink {
    pub fn from_option(path: &Option<PathBuf>) -> Self {
        match path {
            Some(path) => Self::File(path.clone()),
            None => Self::Stdout,
        }
    }

    pub fn write(&self, contents: &str) -> Result<()> {
        match self {
            Self::File(path) => {
                fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
            }
            Self::Stdout => {
                print!("{contents}");
                Ok(())
            }
        }
    }
}

/// Derived path for the companion summary file of a trace output.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Render a CSV document: `# header` line, column row, then records.
pub fn render_csv(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = format!("# {}\n", header.to_json());
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Render a JSON-lines document: header object first, one object per record.
pub fn render_jsonl(header: &Header, rows: &[Value]) -> String {
    let mut text = format!("{}\n", serde_json::json!({ "header": header.to_json() }));
    for row in rows {
        text.push_str(&row.to_string());
        text.push('\n');
    }
    text
}

/// Parse an explicit weight list: negatives are rejected, an off-normalized
/// list is accepted with a warning.
pub fn parse_weights(text: &str) -> Result<MixtureState> {
    let weights: Vec<f64> = text
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("cannot parse weight {tok:?}"))
        })
        .collect::<Result<_>>()?;
    if let Some(bad) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
        bail!("weights must be non-negative and finite, got {bad}");
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        bail!("weights must not all vanish");
    }
    if (sum - 1.0).abs() > 1e-9 {
        eprintln!("warning: weights sum to {sum}; normalizing");
    }
    MixtureState::new(weights).map_err(|e| anyhow!(e))
}

/// A resolved signal source: weights plus the mode the preset implies.
pub struct SourceSpec {
    pub state: MixtureState,
    pub implied_mode: Option<DetectionMode>,
}

/// Resolve `--source`/`--preset` into a mixture.
///
/// Presets: `fig2` (weights ∝ e^{−n}, n = 0..=100, binary detection),
/// `geometric:RATIO,M` (weights ∝ ratio^n), `uniform:M`.
pub fn resolve_source(source: &Option<String>, preset: &Option<String>) -> Result<SourceSpec> {
    match (source, preset) {
        (Some(_), Some(_)) => bail!("--source and --preset are mutually exclusive"),
        (Some(list), None) => Ok(SourceSpec {
            state: parse_weights(list)?,
            implied_mode: None,
        }),
        (None, Some(preset)) => resolve_preset(preset),
        (None, None) => bail!("one of --source or --preset is required"),
    }
}

fn resolve_preset(preset: &str) -> Result<SourceSpec> {
    if preset == "fig2" {
        return Ok(SourceSpec {
            state: MixtureState::geometric((-1.0f64).exp(), 100).expect("valid preset"),
            implied_mode: Some(DetectionMode::Binary),
        });
    }
    if let Some(rest) = preset.strip_prefix("geometric:") {
        let (ratio, truncation) = rest
            .split_once(',')
            .ok_or_else(|| anyhow!("geometric preset needs RATIO,M"))?;
        let ratio: f64 = ratio.trim().parse().context("geometric ratio")?;
        let truncation: usize = truncation.trim().parse().context("geometric truncation")?;
        return Ok(SourceSpec {
            state: MixtureState::geometric(ratio, truncation).map_err(|e| anyhow!(e))?,
            implied_mode: None,
        });
    }
    if let Some(rest) = preset.strip_prefix("uniform:") {
        let truncation: usize = rest.trim().parse().context("uniform truncation")?;
        return Ok(SourceSpec {
            state: MixtureState::equipartition(truncation),
            implied_mode: None,
        });
    }
    bail!("unknown preset {preset:?}; expected fig2, geometric:RATIO,M, or uniform:M")
}

/// Parse a grid given either as a comma list or as `start:stop:count`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("grid {text:?} must be start:stop:count or a comma list");
        }
        let start: f64 = parts[0].trim().parse().context("grid start")?;
        let stop: f64 = parts[1].trim().parse().context("grid stop")?;
        let count: usize = parts[2].trim().parse().context("grid count")?;
        if count == 0 {
            bail!("grid count must be positive");
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let step = (stop - start) / (count - 1) as f64;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("cannot parse grid entry {tok:?}"))
        })
        .collect()
}

/// Parse a comma list of non-negative integers.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("cannot parse integer {tok:?}"))
        })
        .collect()
}

pub fn parse_mode(text: &str) -> Result<DetectionMode> {
    match text {
        "full" => Ok(DetectionMode::FullK),
        "binary" => Ok(DetectionMode::Binary),
        other => bail!("unknown mode {other:?}; expected full or binary"),
    }
}

pub fn mode_name(mode: DetectionMode) -> &'static str {
    match mode {
        DetectionMode::FullK => "full",
        DetectionMode::Binary => "binary",
    }
}
