//! Adam with bias correction.

use crate::autodiff::{Matrix, Param};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    /// Number of updates applied so far.
    pub steps: u64,
}

impl Adam {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param>) -> Self {
        let m: Vec<Matrix> = params
            .into_iter()
            .map(|p| Matrix::zeros(p.value.dim()))
            .collect();
        Self {
            v: m.clone(),
            m,
            steps: 0,
        }
    }

    /// Applies one update from the accumulated `grad` of every parameter.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param>, lr: f64) -> Result<()> {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let mut count = 0;
        for (i, p) in params.into_iter().enumerate() {
            let (m, v) = match (self.m.get_mut(i), self.v.get_mut(i)) {
                (Some(m), Some(v)) if m.dim() == p.value.dim() => (m, v),
                _ => return Err(Error::Usage(format!("optimizer state does not match parameter {i}"))),
            };
            ndarray::Zip::from(&mut p.value)
                .and(m)
                .and(v)
                .and(&p.grad)
                .for_each(|w, m, v, &g| {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
                });
            count += 1;
        }
        if count != self.m.len() {
            return Err(Error::Usage("optimizer state has extra parameters".into()));
        }
        Ok(())
    }
}
