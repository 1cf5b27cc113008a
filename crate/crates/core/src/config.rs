//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [design]
//! kind = "orthonormal-basis"
//! m = 10
//!
//! [truth]
//! rank = 2
//! spectrum = [1.0, 1.0]          # optional, defaults to all ones
//! noise = { type = "gaussian", sigma = 0.1 }
//!
//! [loss]
//! name = "squared"
//!
//! [constraint]
//! type = "operator-norm-ball"
//! radius = 1.5
//!
//! [epsilon]
//! rule = "threshold-multiple"    # or "absolute" with `value = ...`
//! multiple = 1.0
//! delta_reps = 500
//!
//! [bound]
//! t = 3.0
//! B = 2.0
//! C = 1.0
//! D = 4.0
//!
//! [experiment]
//! n = 600
//! trials = 200
//! seed = 20240601
//! ```
//!
//! A `[solver]` table may override any [`SolverConfig`] field except
//! `epsilon`, which always comes from the `[epsilon]` rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::ConstantsConfig;
use crate::design::NoiseModel;
use crate::error::{Error, Result};
use crate::solver::{ConstraintSet, SolverConfig};

/// Master seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: DesignSpec,
    pub truth: TruthSpec,
    #[serde(default)]
    pub loss: LossSpec,
    pub constraint: ConstraintSet,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub epsilon: EpsilonRule,
    #[serde(default)]
    pub bound: BoundSpec,
    pub experiment: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DesignSpec {
    /// Uniform sampling from the `m(m+1)/2` unit-Frobenius basis elements.
    OrthonormalBasis { m: usize },
}

impl DesignSpec {
    pub fn dim(&self) -> usize {
        match *self {
            DesignSpec::OrthonormalBasis { m } => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub rank: usize,
    /// Nonzero eigenvalues of `S★`; all ones when omitted.
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
    pub noise: NoiseModel,
}

impl TruthSpec {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum
            .clone()
            .unwrap_or_else(|| vec![1.0; self.rank])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub name: String,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            name: "squared".into(),
        }
    }
}

/// How the regularization level is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EpsilonRule {
    Absolute {
        value: f64,
    },
    /// `multiple · D · L(a) · Δ / √n`, with `Δ` estimated by Monte Carlo.
    ThresholdMultiple {
        multiple: f64,
        #[serde(default = "default_delta_reps")]
        delta_reps: usize,
    },
}

fn default_delta_reps() -> usize {
    500
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::ThresholdMultiple {
            multiple: 1.0,
            delta_reps: default_delta_reps(),
        }
    }
}

impl EpsilonRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsilonRule::Absolute { value } if !(value >= 0.0) || !value.is_finite() => Err(
                Error::input(format!("epsilon must be finite and nonnegative, got {value}")),
            ),
            EpsilonRule::ThresholdMultiple { multiple, .. }
                if !(multiple > 0.0) || !multiple.is_finite() =>
            {
                Err(Error::input(format!(
                    "epsilon multiple must be positive, got {multiple}"
                )))
            }
            EpsilonRule::ThresholdMultiple { delta_reps: 0, .. } => {
                Err(Error::input("delta_reps must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Same rule with its level multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            EpsilonRule::Absolute { value } => EpsilonRule::Absolute {
                value: value * factor,
            },
            EpsilonRule::ThresholdMultiple {
                multiple,
                delta_reps,
            } => EpsilonRule::ThresholdMultiple {
                multiple: multiple * factor,
                delta_reps,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundSpec {
    /// Confidence parameter; the bound holds with probability `1 − e^{−t}`.
    pub t: f64,
    #[serde(flatten)]
    pub constants: ConstantsConfig,
}

impl Default for BoundSpec {
    fn default() -> Self {
        Self {
            t: 3.0,
            constants: ConstantsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub n: usize,
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Truth ranks for the rank sweep.
    #[serde(default = "default_ranks")]
    pub ranks: Vec<usize>,
    /// Multiples of the base `ε` for the `ε` sweep.
    #[serde(default = "default_multiples")]
    pub multiples: Vec<f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_ranks() -> Vec<usize> {
    vec![1, 2, 4]
}

fn default_multiples() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.design.dim();
        if m == 0 {
            return Err(Error::input("design dimension m must be positive"));
        }
        if self.truth.rank > m {
            return Err(Error::input(format!(
                "truth rank {} exceeds dimension {m}",
                self.truth.rank
            )));
        }
        if let Some(spec) = &self.truth.spectrum {
            if spec.len() != self.truth.rank {
                return Err(Error::Dimension {
                    expected: self.truth.rank,
                    actual: spec.len(),
                });
            }
            if spec.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                return Err(Error::input("truth spectrum entries must be finite and nonzero"));
            }
        }
        if self.experiment.n == 0 {
            return Err(Error::input("sample size n must be at least 1"));
        }
        if self.experiment.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if matches!(self.constraint, ConstraintSet::Unconstrained) {
            return Err(Error::Config(
                "experiments need a bounded constraint set to define a = sup |⟨S, X⟩|".into(),
            ));
        }
        self.constraint.validate()?;
        self.epsilon.validate()?;
        self.solver.validate()?;
        if !(self.bound.t >= 0.0) || !self.bound.t.is_finite() {
            return Err(Error::input("confidence parameter t must be nonnegative"));
        }
        self.bound.constants.validate()?;
        if self.experiment.multiples.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::input("epsilon multiples must be positive"));
        }
        if self.experiment.ranks.iter().any(|r| *r > m) {
            return Err(Error::input("sweep rank exceeds dimension"));
        }
        Ok(())
    }

    /// Copy with the master seed replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.experiment.seed = seed;
        c
    }

    /// Copy with a different truth rank and unit spectrum.
    pub fn with_rank(&self, rank: usize) -> Self {
        let mut c = self.clone();
        c.truth.rank = rank;
        c.truth.spectrum = None;
        c
    }
}
