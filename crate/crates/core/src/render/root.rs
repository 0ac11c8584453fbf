//! First free-to-occupied crossing of the 0.5 level set along rays.

use super::Ray;
use crate::fields::{OccupancyModel, SurfaceSample, Vec3};

const LEVEL: f64 = 0.5;

/// Coarse scan followed by bracketed secant refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RootFinder {
    pub coarse_samples: usize,
    pub secant_steps: usize,
}

impl Default for RootFinder {
    fn default() -> Self {
        Self {
            coarse_samples: 256,
            secant_steps: 8,
        }
    }
}

struct Bracket {
    ray: usize,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    // Illinois-scaled copies used for the next secant point.
    wa: f64,
    wb: f64,
    side: i8,
}

impl Bracket {
    fn new(ray: usize, a: f64, fa: f64, b: f64, fb: f64) -> Self {
        Self {
            ray,
            a,
            fa,
            b,
            fb,
            wa: fa,
            wb: fb,
            side: 0,
        }
    }

    fn next(&self) -> f64 {
        if self.wb == 0.0 {
            return self.b;
        }
        let t = self.b - self.wb * (self.b - self.a) / (self.wb - self.wa);
        t.clamp(self.a, self.b)
    }

    fn update(&mut self, t: f64, ft: f64) {
        if ft < 0.0 {
            self.a = t;
            self.fa = ft;
            self.wa = ft;
            if self.side == -1 {
                self.wb *= 0.5;
            }
            self.side = -1;
        } else {
            self.b = t;
            self.fb = ft;
            self.wb = ft;
            if self.side == 1 {
                self.wa *= 0.5;
            }
            self.side = 1;
        }
    }

    fn estimate(&self) -> f64 {
        if self.fb == 0.0 {
            return self.b;
        }
        let t = self.b - self.fb * (self.b - self.a) / (self.fb - self.fa);
        t.clamp(self.a, self.b)
    }
}

impl RootFinder {
    /// Surface depth per ray, or `None` when no crossing is found.
    ///
    /// Rays whose first coarse sample is already occupied report `t_near`.
    pub fn depths<M: OccupancyModel + ?Sized>(&self, rays: &[Ray], model: &M) -> Vec<Option<f64>> {
        let n = self.coarse_samples.max(2);
        let mut points = Vec::with_capacity(rays.len() * n);
        for ray in rays {
            for i in 0..n {
                points.push(ray.at(coarse_depth(ray, i, n)));
            }
        }
        let occ = model.occupancy(&points);

        let mut depths = vec![None; rays.len()];
        let mut brackets = Vec::new();
        for (r, ray) in rays.iter().enumerate() {
            let o = &occ[r * n..(r + 1) * n];
            if o[0] >= LEVEL {
                depths[r] = Some(ray.t_near);
                continue;
            }
            if let Some(i) = (1..n).find(|&i| o[i] >= LEVEL) {
                let (a, b) = (coarse_depth(ray, i - 1, n), coarse_depth(ray, i, n));
                brackets.push(Bracket::new(r, a, o[i - 1] - LEVEL, b, o[i] - LEVEL));
            }
        }

        for _ in 0..self.secant_steps {
            let active: Vec<usize> = (0..brackets.len())
                .filter(|&i| brackets[i].fb != 0.0 && brackets[i].b > brackets[i].a)
                .collect();
            if active.is_empty() {
                break;
            }
            let ts: Vec<f64> = active.iter().map(|&i| brackets[i].next()).collect();
            let pts: Vec<Vec3> = active
                .iter()
                .zip(&ts)
                .map(|(&i, &t)| rays[brackets[i].ray].at(t))
                .collect();
            let vals = model.occupancy(&pts);
            for ((&i, t), v) in active.iter().zip(ts).zip(vals) {
                brackets[i].update(t, v - LEVEL);
            }
        }
        for b in &brackets {
            depths[b.ray] = Some(b.estimate());
        }
        depths
    }

    /// Surface point, normal and feature per ray.
    pub fn surfaces<M: OccupancyModel + ?Sized>(
        &self,
        rays: &[Ray],
        model: &M,
    ) -> Vec<Option<SurfaceSample>> {
        let depths = self.depths(rays, model);
        let hits: Vec<(usize, f64)> = depths
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|t| (i, t)))
            .collect();
        let points: Vec<Vec3> = hits.iter().map(|&(i, t)| rays[i].at(t)).collect();
        let attr = model.attributes(&points);
        let mut out = vec![None; rays.len()];
        for (k, &(i, t)) in hits.iter().enumerate() {
            out[i] = Some(SurfaceSample {
                point: points[k],
                normal: attr.normals[k],
                feature: attr.features.row(k).to_vec(),
                depth: t,
            });
        }
        out
    }

    pub fn find_surface<M: OccupancyModel + ?Sized>(&self, ray: &Ray, model: &M) -> Option<SurfaceSample> {
        self.surfaces(std::slice::from_ref(ray), model).pop().flatten()
    }
}

fn coarse_depth(ray: &Ray, i: usize, n: usize) -> f64 {
    ray.t_near + (ray.t_far - ray.t_near) * i as f64 / (n - 1) as f64
}

/// Bisection on the coarse bracket; the reference the secant is checked against.
pub fn bisect_depth<M: OccupancyModel + ?Sized>(
    ray: &Ray,
    model: &M,
    coarse_samples: usize,
    iterations: usize,
) -> Option<f64> {
    let n = coarse_samples.max(2);
    let at = |t: f64| model.occupancy(&[ray.at(t)])[0];
    if at(ray.t_near) >= LEVEL {
        return Some(ray.t_near);
    }
    let i = (1..n).find(|&i| at(coarse_depth(ray, i, n)) >= LEVEL)?;
    let (mut a, mut b) = (coarse_depth(ray, i - 1, n), coarse_depth(ray, i, n));
    for _ in 0..iterations {
        let m = 0.5 * (a + b);
        if at(m) >= LEVEL {
            b = m;
        } else {
            a = m;
        }
    }
    Some(0.5 * (a + b))
}
