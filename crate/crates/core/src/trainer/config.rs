//! Training hyperparameters and their file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldConfig;
use crate::render::{IntervalSchedule, RootFinder};

/// Which rendering the optimization uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Volume rendering over the shrinking interval plus the normal regularizer.
    #[default]
    Unisurf,
    /// Surface rendering only.
    SrOnly,
    /// Volume rendering with stratified samples over the whole ray.
    UniformVr,
    /// Like `unisurf` with the regularizer weight forced to zero.
    NoReg,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unisurf" => Ok(Self::Unisurf),
            "sr_only" => Ok(Self::SrOnly),
            "uniform_vr" => Ok(Self::UniformVr),
            "no_reg" => Ok(Self::NoReg),
            other => Err(Error::Usage(format!(
                "unknown mode {other:?}; expected unisurf, sr_only, uniform_vr or no_reg"
            ))),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Unisurf => "unisurf",
            Self::SrOnly => "sr_only",
            Self::UniformVr => "uniform_vr",
            Self::NoReg => "no_reg",
        })
    }
}

/// Everything that controls one optimization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Regularizer weight.
    pub lambda: f64,
    /// Interval decay rate per iteration.
    pub beta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Samples inside the interval.
    pub n: usize,
    /// Free-space samples in front of the interval.
    pub n_free: usize,
    /// Rays per iteration.
    pub m: usize,
    pub lr: f64,
    /// Iterations at which the learning rate is multiplied by 0.1.
    pub lr_decay_steps: Vec<u64>,
    pub total_iters: u64,
    /// Half-width of the uniform regularizer perturbation.
    pub eps_scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: TrainMode,
    /// Coarse samples of the surface search.
    #[serde(default = "default_coarse")]
    pub coarse_samples: usize,
    #[serde(default = "default_secant")]
    pub secant_steps: usize,
    #[serde(default)]
    pub background: [f64; 3],
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    #[serde(default = "FieldConfig::desk")]
    pub model: FieldConfig,
}

fn default_coarse() -> usize {
    RootFinder::default().coarse_samples
}

fn default_secant() -> usize {
    RootFinder::default().secant_steps
}

fn default_checkpoint_every() -> u64 {
    1000
}

/// Multiplier applied at every learning-rate decay step.
pub const LR_DECAY_FACTOR: f64 = 0.1;

impl TrainConfig {
    /// Full-scale schedule.
    pub fn full() -> Self {
        Self {
            lambda: 0.1,
            beta: 1.5e-5,
            delta_min: 0.05,
            delta_max: 1.0,
            n: 64,
            n_free: 32,
            m: 1024,
            lr: 1e-4,
            lr_decay_steps: vec![200_000, 400_000],
            total_iters: 450_000,
            eps_scale: 0.01,
            seed: 0,
            mode: TrainMode::Unisurf,
            coarse_samples: default_coarse(),
            secant_steps: default_secant(),
            background: [0.0; 3],
            checkpoint_every: default_checkpoint_every(),
            model: FieldConfig::full(),
        }
    }

    /// Single-machine schedule: 15k iterations with the interval reaching
    /// its minimum at 10k.
    pub fn desk() -> Self {
        let total_iters = 15_000;
        Self {
            beta: IntervalSchedule::beta_reaching_min_at(0.05, 1.0, 10_000),
            n: 32,
            n_free: 16,
            m: 48,
            lr: 5e-4,
            lr_decay_steps: vec![10_000, 13_500],
            total_iters,
            coarse_samples: 128,
            model: FieldConfig::desk(),
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta_max) {
            return fail(format!(
                "need 0 < delta_min <= delta_max, got {} and {}",
                self.delta_min, self.delta_max
            ));
        }
        if self.m == 0 || self.n == 0 {
            return fail("m and n must be at least 1".into());
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.beta >= 0.0) {
            return fail(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.eps_scale >= 0.0) {
            return fail("eps_scale must be non-negative".into());
        }
        if self.coarse_samples < 2 {
            return fail("coarse_samples must be at least 2".into());
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint_every must be positive".into());
        }
        self.model.validate()
    }

    pub fn schedule(&self) -> IntervalSchedule {
        IntervalSchedule {
            beta: self.beta,
            delta_min: self.delta_min,
            delta_max: self.delta_max,
        }
    }

    pub fn root_finder(&self) -> RootFinder {
        RootFinder {
            coarse_samples: self.coarse_samples,
            secant_steps: self.secant_steps,
        }
    }

    /// Regularizer weight after the mode override.
    pub fn effective_lambda(&self) -> f64 {
        if self.mode == TrainMode::NoReg {
            0.0
        } else {
            self.lambda
        }
    }

    /// Learning rate in effect at iteration `k`.
    pub fn lr_at(&self, k: u64) -> f64 {
        let decays = self.lr_decay_steps.iter().filter(|&&s| k >= s).count();
        self.lr * LR_DECAY_FACTOR.powi(decays as i32)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serializable config")
    }
}
