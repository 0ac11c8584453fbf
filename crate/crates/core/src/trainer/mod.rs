//! Optimization of both networks from posed images.

mod adam;
mod batch;
mod config;
mod loss;

pub use adam::Adam;
pub use batch::{
    evaluate, evaluate_loss, record_surface, record_total_loss, record_volume, Batch, BoundFields,
    Evaluation, LossNodes,
};
pub use config::{TrainConfig, TrainMode, LR_DECAY_FACTOR};
pub use loss::{loss_reg, loss_rec, perturbations, record_loss_rec, record_loss_reg};

use crate::error::{Error, Result};
use crate::fields::Fields;
use crate::rng;
use crate::scene::SceneDataset;

/// Losses and schedule values of one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub l_rec: f64,
    pub l_reg: f64,
    pub delta: f64,
    pub lr: f64,
    pub hits: usize,
    pub rays: usize,
}

impl IterationMetrics {
    pub const CSV_HEADER: &'static str = "iteration,l_rec,l_reg,delta,lr";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.3e}",
            self.iteration, self.l_rec, self.l_reg, self.delta, self.lr
        )
    }
}

/// Optimizer state that must survive a restart.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Number of completed iterations.
    pub iteration: u64,
    pub adam: Adam,
}

pub struct Trainer {
    pub fields: Fields,
    pub config: TrainConfig,
    pub state: TrainState,
}

impl Trainer {
    /// Fresh networks initialized from `config.seed`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let fields = Fields::new(config.model.clone(), config.seed)?;
        Self::resume(fields, config, None)
    }

    pub fn resume(fields: Fields, config: TrainConfig, state: Option<TrainState>) -> Result<Self> {
        if fields.config != config.model {
            return Err(Error::Config("network configuration does not match the checkpoint".into()));
        }
        let state = state.unwrap_or_else(|| TrainState {
            iteration: 0,
            adam: Adam::new(fields.params()),
        });
        Ok(Self {
            fields,
            config,
            state,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.config.total_iters
    }

    /// The batch iteration `k` draws; a function of the seed, `k` and the
    /// current networks only.
    pub fn batch(&self, dataset: &SceneDataset, k: u64) -> Result<Batch> {
        let mut rng = rng::stream(self.config.seed, k);
        let delta = self.config.schedule().delta(k);
        Batch::sample(&self.fields, dataset, &self.config, delta, &mut rng)
    }

    /// Runs one iteration.
    pub fn step(&mut self, dataset: &SceneDataset) -> Result<IterationMetrics> {
        let k = self.state.iteration;
        let batch = self.batch(dataset, k)?;
        let eval = evaluate(&self.fields, &batch, &self.config)?;
        if !eval.total.is_finite() {
            return Err(Error::Numeric(format!("loss is {} at iteration {k}", eval.total)));
        }
        for (p, g) in self.fields.params_mut().zip(eval.grads) {
            p.grad = g;
        }
        let lr = self.config.lr_at(k);
        self.state.adam.step(self.fields.params_mut(), lr)?;
        self.state.iteration += 1;
        Ok(IterationMetrics {
            iteration: k,
            l_rec: eval.rec,
            l_reg: eval.reg,
            delta: batch.delta,
            lr,
            hits: batch.hits(),
            rays: batch.rays.len(),
        })
    }

    /// Steps until `total_iters`, handing every iteration's metrics to
    /// `on_step`, which may stop early by returning `false`.
    pub fn fit<F>(&mut self, dataset: &SceneDataset, mut on_step: F) -> Result<()>
    where
        F: FnMut(&Self, &IterationMetrics) -> Result<bool>,
    {
        while !self.is_done() {
            let metrics = self.step(dataset)?;
            if !on_step(self, &metrics)? {
                break;
            }
        }
        Ok(())
    }
}

/// Running means of the losses between log lines.
#[derive(Clone, Debug, Default)]
pub struct MetricsWindow {
    count: usize,
    l_rec: f64,
    l_reg: f64,
}

impl MetricsWindow {
    pub fn push(&mut self, m: &IterationMetrics) {
        self.count += 1;
        self.l_rec += m.l_rec;
        self.l_reg += m.l_reg;
    }

    /// Averages of the window applied to `last`, then resets.
    pub fn drain(&mut self, last: &IterationMetrics) -> IterationMetrics {
        let n = self.count.max(1) as f64;
        let out = IterationMetrics {
            l_rec: self.l_rec / n,
            l_reg: self.l_reg / n,
            ..*last
        };
        *self = Self::default();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldConfig;
    use crate::mesher::ExtractOptions;
    use crate::scene::SynthScene;

    fn tiny_config(mode: TrainMode) -> TrainConfig {
        TrainConfig {
            m: 8,
            n: 6,
            n_free: 3,
            coarse_samples: 32,
            total_iters: 3,
            mode,
            model: FieldConfig::tiny(),
            ..TrainConfig::desk()
        }
    }

    fn tiny_dataset() -> SceneDataset {
        let scene = SynthScene::sphere_on_table();
        let opts = ExtractOptions {
            initial_res: 8,
            upsample_steps: 0,
        };
        scene.dataset(2, 8, opts, &mut rng::stream(0, 0)).unwrap().0
    }

    #[test]
    fn every_mode_takes_finite_steps() {
        let data = tiny_dataset();
        for mode in [TrainMode::Unisurf, TrainMode::SrOnly, TrainMode::UniformVr, TrainMode::NoReg] {
            let mut t = Trainer::new(tiny_config(mode)).unwrap();
            let before = t.fields.clone();
            t.fit(&data, |_, m| {
                assert!(m.l_rec.is_finite() && m.l_reg.is_finite(), "{mode}");
                Ok(true)
            })
            .unwrap();
            assert_eq!(t.state.iteration, 3);
            assert_ne!(t.fields, before, "{mode}");
        }
    }

    #[test]
    fn no_reg_reports_zero_regularizer() {
        let data = tiny_dataset();
        let mut t = Trainer::new(tiny_config(TrainMode::NoReg)).unwrap();
        assert_eq!(t.step(&data).unwrap().l_reg, 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let data = tiny_dataset();
        let run = || {
            let mut t = Trainer::new(tiny_config(TrainMode::Unisurf)).unwrap();
            t.fit(&data, |_, _| Ok(true)).unwrap();
            t.fields
        };
        assert_eq!(run(), run());
    }
}
