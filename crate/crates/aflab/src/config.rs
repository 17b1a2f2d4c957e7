//! Experiment configuration: JSON in, validated structures out. Every
//! validation error names the offending field path.

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::flow::Scheme;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub geometry: GeometryConfig,
    pub alpha_prime: f64,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    FlatZero,
    ConstantKappa {
        level: f64,
    },
    SyntheticBump {
        amplitude: f64,
    },
    ConsistentNeg,
    /// spinorial-patch ignores the grid lengths; the chart is fixed
    SpinorialPatch,
    FromFiles {
        g_hat: PathBuf,
        kappa: PathBuf,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Constant {
        value: f64,
    },
    /// `value + epsilon * q_{mode_index}` using the computed spectrum
    ConstantPlusMode {
        value: f64,
        mode_index: usize,
        epsilon: f64,
    },
    File {
        path: PathBuf,
    },
    /// `value` modulated by seeded smooth noise of the given relative
    /// amplitude; the seed comes from the command line
    Random {
        value: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub fixed_dt: Option<f64>,
}

fn default_max_steps() -> u64 {
    5_000_000
}

fn default_cfl_safety() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default = "default_spectral_k")]
    pub k: usize,
    /// eigenvalues within this of zero count as kernel; `None` selects a
    /// relative default
    #[serde(default)]
    pub kernel_tol: Option<f64>,
}

fn default_spectral_k() -> usize {
    6
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { k: default_spectral_k(), kernel_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_sample_every() -> u64 {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioConfig {
    /// no acceptance assertions; just log
    None,
    /// smooth medium-data run, no terminal assertions
    Medium,
    /// positive `u` throughout: long-time existence, energy monotonicity,
    /// convergence of the normalized profile to the ground state
    LargeData {
        #[serde(default = "default_eta_fit_tol")]
        eta_fit_tol: f64,
        #[serde(default = "default_v_dist_tol")]
        v_dist_tol: f64,
        #[serde(default = "default_proxy_rate_tol")]
        proxy_rate_tol: f64,
    },
    /// small initial area: finite-time extinction inside the a-priori
    /// envelope
    Blowup {
        #[serde(default = "default_envelope_inflation")]
        envelope_inflation: f64,
    },
}

fn default_eta_fit_tol() -> f64 {
    0.02
}

fn default_v_dist_tol() -> f64 {
    1e-3
}

fn default_proxy_rate_tol() -> f64 {
    0.2
}

fn default_envelope_inflation() -> f64 {
    0.01
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::None
    }
}

fn bad(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), reason: reason.into() }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.nx < 8 {
            return Err(bad("grid.nx", "must be at least 8"));
        }
        if self.grid.ny < 8 {
            return Err(bad("grid.ny", "must be at least 8"));
        }
        if !(self.grid.lx > 0.0) {
            return Err(bad("grid.lx", "must be positive"));
        }
        if !(self.grid.ly > 0.0) {
            return Err(bad("grid.ly", "must be positive"));
        }
        if !(self.alpha_prime > 0.0) || !self.alpha_prime.is_finite() {
            return Err(bad("alpha_prime", "must be positive and finite"));
        }
        match &self.geometry {
            GeometryConfig::ConstantKappa { level } if !(*level >= 0.0) => {
                return Err(bad("geometry.level", "must be >= 0"));
            }
            GeometryConfig::SyntheticBump { amplitude } if !(*amplitude > 0.0) => {
                return Err(bad("geometry.amplitude", "must be positive"));
            }
            GeometryConfig::SpinorialPatch if self.grid.nx != self.grid.ny => {
                return Err(bad("grid", "spinorial-patch needs a square grid"));
            }
            _ => {}
        }
        match &self.initial {
            InitialConfig::Constant { value } if !(*value > 0.0) => {
                return Err(bad("initial.value", "must be positive"));
            }
            InitialConfig::ConstantPlusMode { value, mode_index, epsilon } => {
                if !(*value > 0.0) {
                    return Err(bad("initial.value", "must be positive"));
                }
                if *mode_index >= self.spectral.k {
                    return Err(bad(
                        "initial.mode_index",
                        format!("must be below spectral.k = {}", self.spectral.k),
                    ));
                }
                if !epsilon.is_finite() {
                    return Err(bad("initial.epsilon", "must be finite"));
                }
            }
            InitialConfig::Random { value, amplitude } => {
                if !(*value > 0.0) {
                    return Err(bad("initial.value", "must be positive"));
                }
                if !(*amplitude >= 0.0 && *amplitude < 1.0) {
                    return Err(bad("initial.amplitude", "must lie in [0, 1)"));
                }
            }
            _ => {}
        }
        if !(self.time.t_end > 0.0) {
            return Err(bad("time.t_end", "must be positive"));
        }
        if self.time.max_steps == 0 {
            return Err(bad("time.max_steps", "must be positive"));
        }
        if !(self.time.cfl_safety > 0.0 && self.time.cfl_safety <= 1.0) {
            return Err(bad("time.cfl_safety", "must lie in (0, 1]"));
        }
        if let Some(dt) = self.time.fixed_dt {
            if !(dt > 0.0) {
                return Err(bad("time.fixed_dt", "must be positive when set"));
            }
        }
        if self.spectral.k < 1 {
            return Err(bad("spectral.k", "must be at least 1"));
        }
        if let Some(tol) = self.spectral.kernel_tol {
            if !(tol > 0.0) {
                return Err(bad("spectral.kernel_tol", "must be positive when set"));
            }
        }
        if self.output.sample_every == 0 {
            return Err(bad("output.sample_every", "must be positive"));
        }
        match self.scenario {
            ScenarioConfig::LargeData { eta_fit_tol, v_dist_tol, proxy_rate_tol } => {
                for (name, v) in [
                    ("scenario.eta_fit_tol", eta_fit_tol),
                    ("scenario.v_dist_tol", v_dist_tol),
                    ("scenario.proxy_rate_tol", proxy_rate_tol),
                ] {
                    if !(v > 0.0) {
                        return Err(bad(name, "must be positive"));
                    }
                }
            }
            ScenarioConfig::Blowup { envelope_inflation } => {
                if !(envelope_inflation >= 0.0) {
                    return Err(bad("scenario.envelope_inflation", "must be >= 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }
}
