//! Alpha compositing of occupancies, plus the density quadrature it replaces.

use crate::autodiff::tape::segment_weights;
use crate::error::{Error, Result};

/// `w_i = o_i * prod_{j<i} (1 - o_j)`.
pub fn composite_weights(occupancies: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = occupancies.iter().find(|o| !(0.0..=1.0).contains(*o)) {
        return Err(Error::Domain(format!(
            "occupancy {bad} is outside [0, 1]"
        )));
    }
    Ok(segment_weights(occupancies, &[0, occupancies.len()]))
}

/// Per-sample densities, spacings and colors along one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySamples {
    pub sigma: Vec<f64>,
    /// `delta_i = t_{i+1} - t_i`.
    pub delta: Vec<f64>,
    pub colors: Vec<[f64; 3]>,
}

impl DensitySamples {
    fn validate(&self) -> Result<()> {
        if self.sigma.len() != self.delta.len() || self.sigma.len() != self.colors.len() {
            return Err(Error::Usage("density samples must have equal lengths".into()));
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Domain("densities must be non-negative".into()));
        }
        if self.delta.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Domain("sample spacings must be positive".into()));
        }
        Ok(())
    }
}

/// Quadrature with transmittance `T_i = exp(-sum_{j<i} sigma_j delta_j)`.
pub fn render_volume_density(samples: &DensitySamples) -> Result<[f64; 3]> {
    samples.validate()?;
    let mut rgb = [0.0; 3];
    let mut optical_depth = 0.0f64;
    for ((sigma, delta), c) in samples.sigma.iter().zip(&samples.delta).zip(&samples.colors) {
        let transmittance = (-optical_depth).exp();
        let weight = transmittance * (1.0 - (-sigma * delta).exp());
        for k in 0..3 {
            rgb[k] += weight * c[k];
        }
        optical_depth += sigma * delta;
    }
    Ok(rgb)
}

/// The same quadrature written with `alpha_i = 1 - exp(-sigma_i delta_i)` and
/// the compositing product `alpha_i prod_{j<i} (1 - alpha_j)`.
pub fn render_volume_alpha(samples: &DensitySamples) -> Result<[f64; 3]> {
    samples.validate()?;
    let alpha: Vec<f64> = samples
        .sigma
        .iter()
        .zip(&samples.delta)
        .map(|(s, d)| -(-s * d).exp_m1())
        .collect();
    let weights = composite_weights(&alpha)?;
    let mut rgb = [0.0; 3];
    for (w, c) in weights.iter().zip(&samples.colors) {
        for k in 0..3 {
            rgb[k] += w * c[k];
        }
    }
    Ok(rgb)
}
