//! Scenario descriptions for the Monte Carlo study.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FqrError, Result};
use crate::regression::{FitOptions, Selection, DEFAULT_N_SUB, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// 50-term cosine expansion with `ξ_j ~ N(0, j⁻²)`, `σ₀ = 1`.
    Model1,
    /// Two-component process with `ξ₁ ~ N(0, 4)`, `ξ₂ ~ N(0, 1)`, `σ₀ = 0.5`.
    Model2,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Model1 => "model1",
            ModelKind::Model2 => "model2",
        })
    }
}

impl FromStr for ModelKind {
    type Err = FqrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "model1" => Ok(ModelKind::Model1),
            "2" | "model2" => Ok(ModelKind::Model2),
            other => Err(FqrError::InvalidInput(format!("unknown model '{other}' (expected 1 or 2)"))),
        }
    }
}

/// Quadratic operator of the generating model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpsilonChoice {
    /// Model 1: linear model.
    U00,
    /// Model 1: rank-one kernel `5 β₀ ⊗ β₀`.
    U01,
    /// Model 1: rank-one kernel on the odd-indexed cosines.
    U02,
    /// Model 2: linear model with `β₀ = 2φ₁ + 0.5φ₂`.
    Linear,
    /// Model 2: `β₀ = φ₁ + φ₂` and a full 2×2 quadratic kernel.
    Quadratic,
}

impl UpsilonChoice {
    pub fn valid_for(self, model: ModelKind) -> bool {
        match model {
            ModelKind::Model1 => matches!(self, UpsilonChoice::U00 | UpsilonChoice::U01 | UpsilonChoice::U02),
            ModelKind::Model2 => matches!(self, UpsilonChoice::Linear | UpsilonChoice::Quadratic),
        }
    }
}

impl fmt::Display for UpsilonChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpsilonChoice::U00 => "U00",
            UpsilonChoice::U01 => "U01",
            UpsilonChoice::U02 => "U02",
            UpsilonChoice::Linear => "linear",
            UpsilonChoice::Quadratic => "quadratic",
        })
    }
}

impl FromStr for UpsilonChoice {
    type Err = FqrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u00" => Ok(UpsilonChoice::U00),
            "u01" => Ok(UpsilonChoice::U01),
            "u02" => Ok(UpsilonChoice::U02),
            "linear" => Ok(UpsilonChoice::Linear),
            "quadratic" => Ok(UpsilonChoice::Quadratic),
            other => Err(FqrError::InvalidInput(format!(
                "unknown upsilon choice '{other}' (expected U00, U01, U02, linear or quadratic)"
            ))),
        }
    }
}

/// Contamination scheme; each contaminated unit is selected with probability 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Contamination {
    C0,
    /// Vertical outliers: errors drawn from `N(μ, 0.5²)`.
    C1 {
        mu: f64,
    },
    /// High-leverage curves with second score `N(μ/2, 0.5²)` and shifted errors.
    C2 {
        mu: f64,
    },
    /// Model 1: curves with scores `N(μ, j⁻²)` and responses scaled by `δ`.
    /// Model 2: scores `2|ξ|` and responses `2μ|y|`.
    C3 {
        mu: f64,
        delta: Option<f64>,
    },
}

/// Probability that a unit is contaminated.
pub const CONTAMINATION_RATE: f64 = 0.1;

impl Contamination {
    pub fn validate(&self, model: ModelKind) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(FqrError::InvalidInput(format!("{name} must be finite")))
            }
        };
        match *self {
            Contamination::C0 => Ok(()),
            Contamination::C1 { mu } | Contamination::C2 { mu } => finite("mu", mu),
            Contamination::C3 { mu, delta } => {
                finite("mu", mu)?;
                match (model, delta) {
                    (ModelKind::Model1, None) => Err(FqrError::InvalidInput("model 1 C3 requires delta".into())),
                    (ModelKind::Model1, Some(d)) => finite("delta", d),
                    (ModelKind::Model2, Some(_)) => {
                        Err(FqrError::InvalidInput("model 2 C3 takes mu only, not delta".into()))
                    }
                    (ModelKind::Model2, None) => Ok(()),
                }
            }
        }
    }

    pub fn is_clean(&self) -> bool {
        matches!(self, Contamination::C0)
    }

    /// The same scheme with `μ` (or `δ`) replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Contamination> {
        match (*self, name) {
            (Contamination::C1 { .. }, "mu") => Ok(Contamination::C1 { mu: value }),
            (Contamination::C2 { .. }, "mu") => Ok(Contamination::C2 { mu: value }),
            (Contamination::C3 { delta, .. }, "mu") => Ok(Contamination::C3 { mu: value, delta }),
            (Contamination::C3 { mu, .. }, "delta") => Ok(Contamination::C3 { mu, delta: Some(value) }),
            (scheme, _) => Err(FqrError::InvalidInput(format!("cannot vary '{name}' in scheme {scheme}"))),
        }
    }
}

impl fmt::Display for Contamination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contamination::C0 => write!(f, "C0"),
            Contamination::C1 { mu } => write!(f, "C1:mu={mu}"),
            Contamination::C2 { mu } => write!(f, "C2:mu={mu}"),
            Contamination::C3 { mu, delta: None } => write!(f, "C3:mu={mu}"),
            Contamination::C3 { mu, delta: Some(d) } => write!(f, "C3:mu={mu},delta={d}"),
        }
    }
}

impl FromStr for Contamination {
    type Err = FqrError;

    /// Parses `C0`, `C1:mu=12`, `C2:mu=8` or `C3:mu=4,delta=0.4`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| FqrError::InvalidInput(format!("invalid contamination '{s}': {msg}"));
        let (scheme, params) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), ""),
        };
        let mut mu = None;
        let mut delta = None;
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
            let value: f64 = value.trim().parse().map_err(|_| bad(format!("'{value}' is not a number")))?;
            match key.trim().to_ascii_lowercase().as_str() {
                "mu" => mu = Some(value),
                "delta" => delta = Some(value),
                other => return Err(bad(format!("unknown parameter '{other}'"))),
            }
        }
        let need_mu = || mu.ok_or_else(|| bad("mu is required".into()));
        match scheme.to_ascii_uppercase().as_str() {
            "C0" => {
                if mu.is_some() || delta.is_some() {
                    return Err(bad("C0 takes no parameters".into()));
                }
                Ok(Contamination::C0)
            }
            "C1" | "C2" if delta.is_some() => Err(bad("delta only applies to C3".into())),
            "C1" => Ok(Contamination::C1 { mu: need_mu()? }),
            "C2" => Ok(Contamination::C2 { mu: need_mu()? }),
            "C3" => Ok(Contamination::C3 { mu: need_mu()?, delta }),
            other => Err(bad(format!("unknown scheme '{other}'"))),
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub upsilon: UpsilonChoice,
    pub contamination: Contamination,
    pub n: usize,
    pub n_reps: usize,
    pub grid_size: usize,
    pub seed: u64,
    /// Dimension rule used by both estimators.
    pub selection: Selection,
    pub n_sub: usize,
    pub trim_fraction: f64,
}

impl ScenarioConfig {
    /// Defaults: n = 300, 100 replications, M = 100, 90% variance rule.
    pub fn new(model: ModelKind, upsilon: UpsilonChoice, contamination: Contamination) -> Self {
        Self {
            model,
            upsilon,
            contamination,
            n: 300,
            n_reps: 100,
            grid_size: 100,
            seed: DEFAULT_SEED,
            selection: Selection::VarFrac(0.9),
            n_sub: DEFAULT_N_SUB,
            trim_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.upsilon.valid_for(self.model) {
            return Err(FqrError::InvalidInput(format!(
                "upsilon choice {} does not belong to {}",
                self.upsilon, self.model
            )));
        }
        self.contamination.validate(self.model)?;
        if self.n < 1 || self.n_reps < 1 {
            return Err(FqrError::InvalidInput("n and n_reps must be at least 1".into()));
        }
        if self.grid_size < 3 {
            return Err(FqrError::InvalidInput(format!("grid size must be at least 3, got {}", self.grid_size)));
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(FqrError::InvalidInput(format!("trim fraction {} not in [0, 0.5)", self.trim_fraction)));
        }
        Ok(())
    }

    /// Short label such as `model1/U00/C1:mu=12`.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.model, self.upsilon, self.contamination)
    }

    pub(crate) fn fit_options(&self, method: crate::regression::FitMethod, seed: u64) -> FitOptions {
        FitOptions { method, selection: self.selection, n_sub: self.n_sub, seed, ..FitOptions::default() }
    }
}
