//! Run configuration: a flat TOML file, overridden by command-line values.
//!
//! Precedence is defaults < file < command line. Every command writes the
//! resolved configuration next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{Diffusivity, ModelParams};
use crate::stepper::{MuInit, NewtonSettings};

use super::initial::InitialSpec;

/// Steps used when neither `steps` nor `tmax` is given.
pub const DEFAULT_STEPS: usize = 1000;

/// File name of the resolved configuration inside the output directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub eps: f64,
    pub theta0: f64,
    pub sigma: f64,
    pub delta: f64,
    pub tau: f64,
    pub diffusivity: Diffusivity,
    pub side_length: f64,
    /// Cells per side.
    pub mesh: usize,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,

    pub seed: u64,
    pub phi_scale: f64,
    pub phi_offset: f64,
    pub c_scale: f64,
    pub c_offset: f64,
    pub mu_init: MuInit,

    pub out: PathBuf,
    /// Field dumps every this many steps; 0 dumps only the first and last state.
    pub dump_every: usize,
    /// Time-series rows every this many steps (the last step is always written).
    pub diag_every: usize,

    pub newton_abs_tol: f64,
    pub newton_rel_tol: f64,
    pub newton_max_iter: usize,
    pub phi_guard: f64,
    pub max_halvings: usize,

    pub convergence_tmax: f64,
    pub reference_tau: f64,
    pub convergence_taus: Vec<f64>,

    pub min_c_meshes: Vec<usize>,
    pub min_c_times: Vec<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        let s = NewtonSettings::default();
        let init = InitialSpec::default();
        Self {
            eps: p.eps,
            theta0: p.theta0,
            sigma: p.sigma,
            delta: p.delta,
            tau: p.tau,
            diffusivity: p.diffusivity,
            side_length: p.side_length,
            mesh: p.cells_per_side,
            steps: None,
            tmax: None,
            seed: 1,
            phi_scale: init.phi_scale,
            phi_offset: init.phi_offset,
            c_scale: init.c_scale,
            c_offset: init.c_offset,
            mu_init: MuInit::Consistent,
            out: PathBuf::from("out"),
            dump_every: 0,
            diag_every: 1,
            newton_abs_tol: s.abs_tol,
            newton_rel_tol: s.rel_tol,
            newton_max_iter: s.max_iter,
            phi_guard: s.phi_guard,
            max_halvings: s.max_halvings,
            convergence_tmax: 0.064,
            reference_tau: 1e-4,
            convergence_taus: vec![6.4e-3, 3.2e-3, 1.6e-3, 8e-4, 4e-4, 2e-4],
            min_c_meshes: vec![30, 60, 90],
            min_c_times: vec![0.2, 0.4, 0.6],
            sweep_param: None,
            sweep_values: Vec::new(),
        }
    }
}

/// Parameter varied by the `sweep` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Tau,
    Delta,
    Theta0,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Delta => "delta",
            SweepParam::Theta0 => "theta0",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            SweepParam::Tau => cfg.tau = value,
            SweepParam::Delta => cfg.delta = value,
            SweepParam::Theta0 => cfg.theta0 = value,
        }
        cfg
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(SweepParam::Tau),
            "delta" => Ok(SweepParam::Delta),
            "theta0" => Ok(SweepParam::Theta0),
            other => Err(Error::Config(format!(
                "unknown sweep parameter `{other}` (expected tau, delta or theta0)"
            ))),
        }
    }
}

/// Command-line values; `None` leaves the lower-precedence value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub steps: Option<usize>,
    pub tmax: Option<f64>,
    pub eps: Option<f64>,
    pub theta0: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub mesh: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Defaults, then the file (if any), then `overrides`; validated.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        // a step count or end time given on the command line replaces
        // whichever of the two the file used
        if o.steps.is_some() || o.tmax.is_some() {
            self.steps = o.steps;
            self.tmax = o.tmax;
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field.clone() {
                    self.$field = v;
                })*
            };
        }
        set!(seed, out, eps, theta0, sigma, delta, tau, mesh);
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            eps: self.eps,
            theta0: self.theta0,
            sigma: self.sigma,
            delta: self.delta,
            tau: self.tau,
            diffusivity: self.diffusivity,
            side_length: self.side_length,
            cells_per_side: self.mesh,
        }
    }

    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            abs_tol: self.newton_abs_tol,
            rel_tol: self.newton_rel_tol,
            max_iter: self.newton_max_iter,
            phi_guard: self.phi_guard,
            max_halvings: self.max_halvings,
        }
    }

    pub fn initial(&self) -> InitialSpec {
        InitialSpec {
            phi_scale: self.phi_scale,
            phi_offset: self.phi_offset,
            c_scale: self.c_scale,
            c_offset: self.c_offset,
        }
    }

    /// Number of steps of a `run`, from `steps`, `tmax` or the default.
    pub fn n_steps(&self) -> Result<usize> {
        match (self.steps, self.tmax) {
            (Some(n), None) => Ok(n),
            (None, None) => Ok(DEFAULT_STEPS),
            (steps, Some(t)) => {
                let n = steps_to(t, self.tau, "tmax")?;
                match steps {
                    Some(s) if s != n => Err(Error::Config(format!(
                        "steps = {s} and tmax = {t} disagree for tau = {}",
                        self.tau
                    ))),
                    _ => Ok(n),
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.model_params().validate().map_err(wrap)?;
        self.newton().validate().map_err(wrap)?;
        self.initial().validate().map_err(wrap)?;
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} does not fit in 63 bits", self.seed)));
        }
        if self.diag_every == 0 {
            return Err(Error::Config("diag_every must be at least 1".into()));
        }
        if let Some(t) = self.tmax {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tmax must be nonnegative, got {t}")));
            }
        }
        self.n_steps()?;
        if self.min_c_meshes.iter().any(|&m| m < 2) {
            return Err(Error::Config("min_c_meshes entries must be at least 2".into()));
        }
        for &t in self.min_c_times.iter().chain([&self.convergence_tmax]) {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("times must be nonnegative, got {t}")));
            }
        }
        for &t in self.convergence_taus.iter().chain([&self.reference_tau]) {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("time steps must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Writes the resolved configuration to `dir`, creating it if needed.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut resolved = self.clone();
        let n = self.n_steps()?;
        resolved.steps = Some(n);
        resolved.tmax = Some(n as f64 * self.tau);
        let path = dir.join(RESOLVED_CONFIG);
        fs::write(&path, resolved.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// `T/τ` when it is an integer to within 1e-12 relative, else a config error.
pub fn steps_to(t: f64, tau: f64, what: &str) -> Result<usize> {
    let n = (t / tau).round();
    if (n * tau - t).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::Config(format!(
            "{what} = {t} is not a whole number of steps of tau = {tau}"
        )));
    }
    Ok(n as usize)
}
