//! Experiment configuration: TOML on disk, overridable from the command line,
//! echoed verbatim into every result table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinwire_core::chain::{AlphaMode, Protocol};
use spinwire_core::ensemble::{default_beta_grid, MeasurePlan, DEFAULT_REALIZATIONS};
use spinwire_core::fitting::{AmplitudeRule, BReference};
use spinwire_core::measures::BVariant;

use crate::error::{CliError, CliResult};

/// Line that separates the table preamble from the embedded config.
pub const CONFIG_MARKER: &str = "# --- config ---";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub protocols: Vec<Protocol>,
    pub n: Vec<usize>,
    pub epsilon: f64,
    /// `opt`, `heuristic` or a number.
    pub alpha: String,
    pub realizations: usize,
    pub seed: u64,
    pub beta_grid: Vec<f64>,
    pub b_variant: BVariant,
    pub out: PathBuf,
    pub sweep: SweepSection,
    pub fit: FitSection,
    #[serde(rename = "prob-gap")]
    pub prob_gap: ProbGapSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// `sigma_j` with `sigma_eps = 0`, then `sigma_eps` with `sigma_j = 0`.
    Separate,
    /// Full `sigma_j x sigma_eps` grid.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub sigma_j: Vec<f64>,
    pub sigma_eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetChoice {
    Average,
    Minimum,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub target: TargetChoice,
    pub amplitude: AmplitudeRule,
    pub b_reference: BReference,
    pub input: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbGapSection {
    pub n: Vec<usize>,
    pub sigma_j: Vec<f64>,
    pub sigma_eps: Vec<f64>,
}

/// `0, step, ..., stop`, computed by multiplication so the points do not drift.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| start + k as f64 * step).collect()
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            mode: SweepMode::Separate,
            sigma_j: linspace_step(0.0, 0.3, 0.05),
            sigma_eps: linspace_step(0.0, 0.3, 0.05),
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            target: TargetChoice::Both,
            amplitude: AmplitudeRule::ClosedForm,
            b_reference: BReference::GridMean,
            input: Vec::new(),
        }
    }
}

impl Default for ProbGapSection {
    fn default() -> Self {
        Self {
            n: vec![15, 25],
            sigma_j: linspace_step(0.0, 0.5, 0.05),
            sigma_eps: linspace_step(0.0, 0.5, 0.05),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocols: Protocol::ALL.to_vec(),
            n: vec![15, 25, 50],
            epsilon: spinwire_core::chain::DEFAULT_EPSILON,
            alpha: "opt".into(),
            realizations: DEFAULT_REALIZATIONS,
            seed: 1,
            beta_grid: default_beta_grid(),
            b_variant: BVariant::Calculus,
            out: PathBuf::from("results"),
            sweep: SweepSection::default(),
            fit: FitSection::default(),
            prob_gap: ProbGapSection::default(),
        }
    }
}

pub fn parse_alpha(s: &str) -> CliResult<AlphaMode> {
    match s.trim() {
        "opt" | "optimized" | "optimal" => Ok(AlphaMode::Optimized),
        "heuristic" => Ok(AlphaMode::Heuristic),
        other => {
            let value: f64 = other.parse().map_err(|_| {
                CliError::config(
                    "alpha",
                    format!("expected opt, heuristic or a number, got `{other}`"),
                )
            })?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(CliError::config("alpha", "must be positive"));
            }
            Ok(AlphaMode::Explicit(value))
        }
    }
}

pub fn parse_b_variant(s: &str) -> CliResult<BVariant> {
    match s.trim() {
        "calculus" => Ok(BVariant::Calculus),
        "published" | "paper" => Ok(BVariant::Published),
        other => Err(CliError::config(
            "b_variant",
            format!("expected calculus or published, got `{other}`"),
        )),
    }
}

pub fn parse_protocols(s: &str) -> CliResult<Vec<Protocol>> {
    if s.trim() == "both" || s.trim() == "all" {
        return Ok(Protocol::ALL.to_vec());
    }
    s.split(',')
        .map(|p| p.trim().parse::<Protocol>().map_err(CliError::from))
        .collect()
}

pub fn parse_sizes(field: &str, s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::config(field, format!("`{t}` is not a chain length")))
        })
        .collect()
}

/// Comma list (`0,0.1,0.2`) or inclusive range (`start:stop:step`).
pub fn parse_grid(field: &str, s: &str) -> CliResult<Vec<f64>> {
    let number = |t: &str| -> CliResult<f64> {
        t.trim()
            .parse()
            .map_err(|_| CliError::config(field, format!("`{t}` is not a number")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(CliError::config(
                    field,
                    "range needs start <= stop and step > 0",
                ));
            }
            Ok(linspace_step(start, stop, step))
        }
        [_] => s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(number)
            .collect(),
        _ => Err(CliError::config(
            field,
            "expected a comma list or start:stop:step",
        )),
    }
}

fn check_grid(field: &str, grid: &[f64]) -> CliResult<()> {
    if grid.is_empty() {
        return Err(CliError::config(field, "grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(CliError::config(
            field,
            format!("{bad} is not a valid disorder strength"),
        ));
    }
    Ok(())
}

fn check_sizes(field: &str, sizes: &[usize]) -> CliResult<()> {
    if sizes.is_empty() {
        return Err(CliError::config(field, "list is empty"));
    }
    if let Some(bad) = sizes.iter().find(|&&n| n < 2) {
        return Err(CliError::config(
            field,
            format!("chain length {bad} is below 2"),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads a TOML config, or the config echoed into a result table.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let toml_text = if text.trim_start().starts_with('#') {
            extract_echo(&text).ok_or_else(|| CliError::Table {
                path: path.to_path_buf(),
                reason: "no embedded config block".into(),
            })?
        } else {
            text
        };
        Self::from_toml(&toml_text).map_err(|e| match e {
            CliError::Config { field, reason } => {
                CliError::config(format!("{}: {field}", path.display()), reason)
            }
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config("toml", e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn alpha_mode(&self) -> CliResult<AlphaMode> {
        parse_alpha(&self.alpha)
    }

    pub fn plan(&self) -> MeasurePlan {
        MeasurePlan {
            beta_grid: self.beta_grid.clone(),
            b_variant: self.b_variant,
        }
    }

    /// Checks the fields every subcommand relies on.
    pub fn validate_common(&self) -> CliResult<()> {
        if self.protocols.is_empty() {
            return Err(CliError::config("protocols", "list is empty"));
        }
        check_sizes("n", &self.n)?;
        if !(self.epsilon.is_finite()) {
            return Err(CliError::config("epsilon", "must be finite"));
        }
        self.alpha_mode()?;
        if self.realizations == 0 {
            return Err(CliError::config("realizations", "must be at least 1"));
        }
        if self.beta_grid.is_empty() {
            return Err(CliError::config("beta_grid", "grid is empty"));
        }
        if let Some(bad) = self.beta_grid.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(CliError::config(
                "beta_grid",
                format!("{bad} is outside [0, 1]"),
            ));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> CliResult<()> {
        self.validate_common()?;
        check_grid("sweep.sigma_j", &self.sweep.sigma_j)?;
        check_grid("sweep.sigma_eps", &self.sweep.sigma_eps)
    }

    pub fn validate_prob_gap(&self) -> CliResult<()> {
        self.validate_common()?;
        check_sizes("prob-gap.n", &self.prob_gap.n)?;
        check_grid("prob-gap.sigma_j", &self.prob_gap.sigma_j)?;
        check_grid("prob-gap.sigma_eps", &self.prob_gap.sigma_eps)
    }
}

/// The TOML block following [`CONFIG_MARKER`] in a table preamble.
pub fn extract_echo(text: &str) -> Option<String> {
    let mut lines = text.lines().skip_while(|l| l.trim_end() != CONFIG_MARKER);
    lines.next()?;
    let body: Vec<&str> = lines
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
        .collect();
    Some(body.join("\n"))
}
