//! JSON run configuration.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    MzSweep,
    HomDip,
    HomMc,
    ControlCurves,
    MemoryPrep,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::MzSweep => "mz-sweep",
            ScenarioKind::HomDip => "hom-dip",
            ScenarioKind::HomMc => "hom-mc",
            ScenarioKind::ControlCurves => "control-curves",
            ScenarioKind::MemoryPrep => "memory-prep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameName {
    Displaced,
    Lab,
}

/// Write-step settings for `memory-prep`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    #[serde(default = "one")]
    pub g: f64,
    /// Defaults to the value that puts `gA / (ΓT)` at the threshold margin.
    pub kappa1: Option<f64>,
    #[serde(default = "tenth")]
    pub kappa2: f64,
    /// Coherent amplitude pre-loaded in cavity 2 (real).
    #[serde(default = "one")]
    pub alpha0: f64,
    #[serde(default = "one")]
    pub duration: f64,
    /// Pulse area; defaults to a full swap, `gA = π/2`.
    pub area: Option<f64>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            g: 1.0,
            kappa1: None,
            kappa2: 0.1,
            alpha0: 1.0,
            duration: 1.0,
            area: None,
        }
    }
}

/// Validated configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<ScenarioKind>,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "third")]
    pub gbar: f64,
    /// Mechanical amplitudes; `null` is the classical controller.
    #[serde(default = "classical_only")]
    pub beta_list: Vec<Option<f64>>,
    #[serde(default = "default_phi_grid")]
    pub phi_grid: Vec<f64>,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<f64>,
    #[serde(default = "default_gt_grid")]
    pub gt_grid: Vec<f64>,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    pub mech_dim: Option<usize>,
    #[serde(default = "displaced")]
    pub frame: FrameName,
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub memory: MemoryConfig,
}

fn one() -> f64 {
    1.0
}
fn tenth() -> f64 {
    0.1
}
fn third() -> f64 {
    1.0 / 3.0
}
fn classical_only() -> Vec<Option<f64>> {
    vec![None]
}
fn default_phi_grid() -> Vec<f64> {
    (0..24).map(|k| k as f64 * TAU / 24.0).collect()
}
fn default_tau_grid() -> Vec<f64> {
    (0..=16).map(|k| -4.0 + 0.5 * k as f64).collect()
}
fn default_gt_grid() -> Vec<f64> {
    (0..=200).map(|k| k as f64 * PI / 100.0).collect()
}
fn default_n_traj() -> usize {
    1200
}
fn default_sample_dt() -> f64 {
    0.1
}
fn displaced() -> FrameName {
    FrameName::Displaced
}

fn invalid(field: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {why}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be a positive finite number")))
    }
}

fn finite_grid(field: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(invalid(field, "grid must not be empty"));
    }
    match grid.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(invalid(field, format!("{v} is not finite"))),
        None => Ok(()),
    }
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scenario(&self) -> ScenarioKind {
        self.scenario.expect("validated")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.scenario.is_none() {
            return Err(invalid(
                "scenario",
                "missing; one of mz-sweep, hom-dip, hom-mc, control-curves, memory-prep",
            ));
        }
        positive("kappa", self.kappa)?;
        positive("gamma", self.gamma)?;
        if !(self.gbar >= 0.0 && self.gbar.is_finite()) {
            return Err(invalid("gbar", format!("{} must be >= 0", self.gbar)));
        }
        if self.beta_list.is_empty() {
            return Err(invalid("beta_list", "list must not be empty"));
        }
        for b in self.beta_list.iter().flatten() {
            positive("beta_list", *b)?;
        }
        finite_grid("phi_grid", &self.phi_grid)?;
        finite_grid("tau_grid", &self.tau_grid)?;
        finite_grid("gt_grid", &self.gt_grid)?;
        if self.n_traj == 0 {
            return Err(invalid("n_traj", "need at least one trajectory"));
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if let Some(t) = self.t_end {
            positive("t_end", t)?;
        }
        positive("sample_dt", self.sample_dt)?;
        if let Some(d) = self.mech_dim {
            if d < 2 {
                return Err(invalid("mech_dim", format!("{d} must be >= 2")));
            }
        }
        let m = &self.memory;
        positive("memory.g", m.g)?;
        positive("memory.duration", m.duration)?;
        if let Some(k) = m.kappa1 {
            // infinity is allowed: it switches the correlated loss off
            if !(k > 0.0) {
                return Err(invalid("memory.kappa1", format!("{k} must be > 0")));
            }
        }
        if !(m.kappa2 >= 0.0 && m.kappa2.is_finite()) {
            return Err(invalid("memory.kappa2", format!("{} must be >= 0", m.kappa2)));
        }
        if !m.alpha0.is_finite() {
            return Err(invalid("memory.alpha0", "must be finite"));
        }
        if let Some(a) = m.area {
            positive("memory.area", a)?;
        }
        Ok(())
    }
}
