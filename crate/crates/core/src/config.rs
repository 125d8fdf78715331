//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForcingSpec, ProblemSpec};
use crate::partition::OuterOptions;

/// One refinement index or an ascending list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSetting {
    One(usize),
    Sweep(Vec<usize>),
}

impl KSetting {
    pub fn values(&self) -> Vec<usize> {
        match self {
            KSetting::One(k) => vec![*k],
            KSetting::Sweep(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellCountName {
    #[serde(rename = "equal-to-k")]
    EqualToK,
}

/// Number of cells `J`: fixed, or `"equal-to-k"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellCount {
    Fixed(usize),
    Named(CellCountName),
}

impl CellCount {
    pub fn resolve(&self, k: usize) -> usize {
        match self {
            CellCount::Fixed(j) => *j,
            CellCount::Named(CellCountName::EqualToK) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Emit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Emit::Json),
            "csv" => Ok(Emit::Csv),
            "svg" => Ok(Emit::Svg),
            other => Err(Error::Config(format!("unknown emit kind {other:?}"))),
        }
    }
}

/// Thresholds of the verification gates run after a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gates {
    /// Relative discrete dual-norm residual.
    pub residual: f64,
    /// Normalized stationarity defect per sine field.
    pub stationarity: f64,
    /// Sup-norm shooting mismatch; unchecked when absent.
    pub shooting_sup: Option<f64>,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            stationarity: 1e-5,
            shooting_sup: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversarialConfig {
    pub k_eig: usize,
    pub margin: f64,
    /// Largest `k` tried while refining.
    pub max_k: usize,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            k_eig: 3,
            margin: 1.0,
            max_k: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingConfig {
    pub lengths: Vec<f64>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1.0, 0.5, 0.25, 0.125],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub k: KSetting,
    pub cells: CellCount,
    pub l_bound: f64,
    /// Interior nodes per cell; derived from `spacing` when absent.
    pub m_per_cell: Option<usize>,
    /// Target global node spacing.
    pub spacing: f64,
    /// Multistart seed; TOML integers cap it at `i64::MAX`.
    pub seed: u64,
    pub shooting_step: f64,
    pub output_dir: PathBuf,
    pub emit: Vec<Emit>,
    pub tolerances: OuterOptions,
    pub gates: Gates,
    pub adversarial: AdversarialConfig,
    pub scaling: ScalingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec {
                a: 0.0,
                b: 1.0,
                p: 3.0,
                c_plus: 1.0,
                c_minus: 1.0,
                forcing: ForcingSpec::sinusoid(2.0, 3.0 * std::f64::consts::PI, 0.0),
            },
            k: KSetting::One(16),
            cells: CellCount::Named(CellCountName::EqualToK),
            l_bound: 2.0,
            m_per_cell: None,
            spacing: 1e-3,
            seed: 0,
            shooting_step: crate::oracle::DEFAULT_STEP,
            output_dir: PathBuf::from("out"),
            emit: vec![Emit::Json, Emit::Csv, Emit::Svg],
            tolerances: OuterOptions::default(),
            gates: Gates::default(),
            adversarial: AdversarialConfig::default(),
            scaling: ScalingConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Interior nodes per cell for `cells` cells.
    pub fn m_for(&self, cells: usize) -> usize {
        self.m_per_cell.unwrap_or_else(|| {
            let per_cell = self.problem.length() / (cells as f64 * self.spacing);
            (per_cell.round() as usize).saturating_sub(1).max(3)
        })
    }

    pub fn emits(&self, kind: Emit) -> bool {
        self.emit.contains(&kind)
    }

    /// Check every numeric field before any solve starts.
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        let ks = self.k.values();
        if ks.is_empty() || ks.contains(&0) {
            return Err(Error::Config("k must be a positive integer or a non-empty list of them".into()));
        }
        if ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("k list must be strictly ascending, got {ks:?}")));
        }
        if let CellCount::Fixed(0) = self.cells {
            return Err(Error::Config("cells must be positive".into()));
        }
        if !(self.l_bound >= 1.0) || !self.l_bound.is_finite() {
            return Err(Error::Config(format!("l_bound must be finite and >= 1, got {}", self.l_bound)));
        }
        if let Some(m) = self.m_per_cell {
            if m < 3 {
                return Err(Error::Config(format!("m_per_cell must be at least 3, got {m}")));
            }
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::Config(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.shooting_step > 0.0) || !self.shooting_step.is_finite() {
            return Err(Error::Config(format!("shooting_step must be positive, got {}", self.shooting_step)));
        }
        let t = &self.tolerances;
        if !(t.tol_flux > 0.0 && t.tol_outer > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if t.first_sign != 1 && t.first_sign != -1 {
            return Err(Error::Config(format!("first_sign must be 1 or -1, got {}", t.first_sign)));
        }
        if !(t.start_jitter >= 0.0 && t.start_jitter < 1.0) {
            return Err(Error::Config(format!("start_jitter must lie in [0, 1), got {}", t.start_jitter)));
        }
        if !(self.adversarial.margin > 0.0) || !self.adversarial.margin.is_finite() {
            return Err(Error::Config(format!(
                "adversarial margin must be strictly positive, got {}",
                self.adversarial.margin
            )));
        }
        if self.adversarial.k_eig < 2 {
            return Err(Error::Config(format!(
                "adversarial k_eig must be at least 2, got {}",
                self.adversarial.k_eig
            )));
        }
        if self.scaling.lengths.len() < 2 || self.scaling.lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("scaling needs at least two positive lengths".into()));
        }
        Ok(())
    }
}
