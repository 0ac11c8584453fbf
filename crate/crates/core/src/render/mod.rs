//! Unified volume and surface rendering along rays.

mod composite;
mod root;
mod sampling;

pub use composite::{composite_weights, render_volume_alpha, render_volume_density, DensitySamples};
pub use root::{bisect_depth, RootFinder};
pub use sampling::{
    decay_delta, full_ray, plan_samples, sample_interval, stratified, IntervalSchedule, SampleKind,
    SamplePlan,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::tape::segment_weights;
use crate::error::{Error, Result};
use crate::fields::{ColorModel, OccupancyModel, Vec3};

const UNIT_TOLERANCE: f64 = 1e-9;

/// `r(t) = origin + t * direction` for `t` in `[t_near, t_far]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        if !((direction.norm() - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::Domain(format!(
                "ray direction has norm {}, expected 1",
                direction.norm()
            )));
        }
        if !(t_near < t_far) {
            return Err(Error::Domain(format!(
                "ray bounds must satisfy t_near < t_far, got [{t_near}, {t_far}]"
            )));
        }
        Ok(Self {
            origin,
            direction,
            t_near,
            t_far,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Color and compositing weights of one volume-rendered ray.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeRender {
    pub rgb: [f64; 3],
    pub weights: Vec<f64>,
    /// Sum of the weights.
    pub opacity: f64,
}

/// Composites `colors` with occupancy weights over `background`.
pub fn composite_colors(occupancy: &[f64], colors: &[[f64; 3]], background: [f64; 3]) -> VolumeRender {
    let weights = segment_weights(occupancy, &[0, occupancy.len()]);
    let mut rgb = [0.0; 3];
    for (w, c) in weights.iter().zip(colors) {
        for k in 0..3 {
            rgb[k] += w * c[k];
        }
    }
    let opacity: f64 = weights.iter().sum();
    for k in 0..3 {
        rgb[k] += (1.0 - opacity) * background[k];
    }
    VolumeRender {
        rgb,
        weights,
        opacity,
    }
}

/// Volume-renders one ray at the depths of `plan`.
pub fn render_volume<O, C>(
    ray: &Ray,
    occupancy: &O,
    color: &C,
    plan: &SamplePlan,
    background: [f64; 3],
) -> Result<VolumeRender>
where
    O: OccupancyModel + ?Sized,
    C: ColorModel + ?Sized,
{
    if plan.is_empty() {
        return Err(Error::Usage("sample plan is empty".into()));
    }
    let mut out = render_volume_batch(
        std::slice::from_ref(ray),
        occupancy,
        color,
        std::slice::from_ref(plan),
        background,
    );
    Ok(out.pop().expect("one ray"))
}

/// Volume-renders many rays with a single batched field evaluation.
pub fn render_volume_batch<O, C>(
    rays: &[Ray],
    occupancy: &O,
    color: &C,
    plans: &[SamplePlan],
    background: [f64; 3],
) -> Vec<VolumeRender>
where
    O: OccupancyModel + ?Sized,
    C: ColorModel + ?Sized,
{
    let mut points = Vec::new();
    let mut directions = Vec::new();
    for (ray, plan) in rays.iter().zip(plans) {
        for &t in &plan.depths {
            points.push(ray.at(t));
            directions.push(ray.direction);
        }
    }
    let attr = occupancy.attributes(&points);
    let colors = color.colors(&points, &attr.normals, &attr.features, &directions);
    let mut start = 0;
    plans
        .iter()
        .map(|plan| {
            let end = start + plan.len();
            let r = composite_colors(&attr.occupancy[start..end], &colors[start..end], background);
            start = end;
            r
        })
        .collect()
}

/// Color at the first surface crossing, or `None` on a miss.
pub fn render_surface<O, C>(ray: &Ray, occupancy: &O, color: &C, finder: &RootFinder) -> Option<[f64; 3]>
where
    O: OccupancyModel + ?Sized,
    C: ColorModel + ?Sized,
{
    render_surface_batch(std::slice::from_ref(ray), occupancy, color, finder).pop().flatten()
}

pub fn render_surface_batch<O, C>(
    rays: &[Ray],
    occupancy: &O,
    color: &C,
    finder: &RootFinder,
) -> Vec<Option<[f64; 3]>>
where
    O: OccupancyModel + ?Sized,
    C: ColorModel + ?Sized,
{
    let hits = finder.surfaces(rays, occupancy);
    let idx: Vec<usize> = (0..rays.len()).filter(|&i| hits[i].is_some()).collect();
    let points: Vec<Vec3> = idx.iter().map(|&i| hits[i].as_ref().unwrap().point).collect();
    let normals: Vec<Vec3> = idx.iter().map(|&i| hits[i].as_ref().unwrap().normal).collect();
    let dirs: Vec<Vec3> = idx.iter().map(|&i| rays[i].direction).collect();
    let width = hits
        .iter()
        .flatten()
        .next()
        .map_or(0, |h| h.feature.len());
    let features = crate::autodiff::Matrix::from_shape_fn((idx.len(), width), |(r, c)| {
        hits[idx[r]].as_ref().unwrap().feature[c]
    });
    let colors = color.colors(&points, &normals, &features, &dirs);
    let mut out = vec![None; rays.len()];
    for (k, &i) in idx.iter().enumerate() {
        out[i] = Some(colors[k]);
    }
    out
}

/// How a batch of rays is turned into colors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RenderMode {
    /// Volume rendering with `interval` samples in `[t_s - delta, t_s + delta]`
    /// and `free` samples in front of it.
    Volume {
        delta: f64,
        interval: usize,
        free: usize,
    },
    /// One color evaluation at the root-found surface point.
    Surface,
}

/// Rendering options shared by both modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub mode: RenderMode,
    pub finder: RootFinder,
    pub background: [f64; 3],
}

impl RenderOptions {
    pub fn surface() -> Self {
        Self {
            mode: RenderMode::Surface,
            finder: RootFinder::default(),
            background: [0.0; 3],
        }
    }

    pub fn volume(delta: f64, interval: usize, free: usize) -> Self {
        Self {
            mode: RenderMode::Volume {
                delta,
                interval,
                free,
            },
            ..Self::surface()
        }
    }
}

/// Sample plans for a batch of rays, root-finding each one first.
pub fn plan_rays<O, R>(
    rays: &[Ray],
    occupancy: &O,
    finder: &RootFinder,
    delta: f64,
    interval: usize,
    free: usize,
    rng: &mut R,
) -> Vec<SamplePlan>
where
    O: OccupancyModel + ?Sized,
    R: Rng + ?Sized,
{
    let depths = finder.depths(rays, occupancy);
    rays.iter()
        .zip(depths)
        .map(|(ray, t_s)| plan_samples(ray, t_s, delta, interval, free, rng))
        .collect()
}

/// Renders a batch of rays; misses in surface mode take the background.
pub fn render_rays<O, C, R>(
    rays: &[Ray],
    occupancy: &O,
    color: &C,
    options: &RenderOptions,
    rng: &mut R,
) -> Vec<[f64; 3]>
where
    O: OccupancyModel + ?Sized,
    C: ColorModel + ?Sized,
    R: Rng + ?Sized,
{
    match options.mode {
        RenderMode::Surface => render_surface_batch(rays, occupancy, color, &options.finder)
            .into_iter()
            .map(|c| c.unwrap_or(options.background))
            .collect(),
        RenderMode::Volume {
            delta,
            interval,
            free,
        } => {
            let plans = plan_rays(rays, occupancy, &options.finder, delta, interval, free, rng);
            render_volume_batch(rays, occupancy, color, &plans, options.background)
                .into_iter()
                .map(|r| r.rgb)
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::analytic::{ConstantColor, EmptyField, SphereField};
    use crate::rng;

    fn ray_z() -> Ray {
        Ray::new(Vec3::new(0.0, 0.0, -2.0), Vec3::z(), 0.05, 4.0).unwrap()
    }

    #[test]
    fn ray_invariants_are_checked() {
        assert!(Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.1), 0.0, 1.0).is_err());
        assert!(Ray::new(Vec3::zeros(), Vec3::z(), 1.0, 1.0).is_err());
    }

    #[test]
    fn empty_space_shows_the_background() {
        let plan = full_ray(&ray_z(), 16, &mut rng::stream(0, 0));
        let bg = [0.2, 0.3, 0.4];
        let r = render_volume(&ray_z(), &EmptyField, &ConstantColor([1.0; 3]), &plan, bg).unwrap();
        assert_eq!(r.rgb, bg);
        assert_eq!(r.opacity, 0.0);
    }

    #[test]
    fn binary_occupancy_picks_the_first_hit() {
        let colors = [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9], [0.2, 0.2, 0.2]];
        let r = composite_colors(&[0.0, 0.0, 1.0, 1.0], &colors, [0.0; 3]);
        assert_eq!(r.rgb, colors[2]);
    }

    #[test]
    fn empty_plan_is_rejected() {
        let r = render_volume(
            &ray_z(),
            &EmptyField,
            &ConstantColor([1.0; 3]),
            &SamplePlan::default(),
            [0.0; 3],
        );
        assert!(r.is_err());
    }

    #[test]
    fn sharp_sphere_volume_render_matches_constant_color() {
        let field = SphereField::new(0.5, 1e3);
        let c = [0.3, 0.6, 0.9];
        let mut r = rng::stream(7, 0);
        let plans = plan_rays(&[ray_z()], &field, &RootFinder::default(), 0.05, 64, 0, &mut r);
        let out = render_volume(&ray_z(), &field, &ConstantColor(c), &plans[0], [0.0; 3]).unwrap();
        for k in 0..3 {
            assert!((out.rgb[k] - c[k]).abs() < 0.01);
        }
    }

    #[test]
    fn surface_render_of_constant_color() {
        let field = SphereField::new(0.5, 1e3);
        let c = [0.3, 0.6, 0.9];
        let f = RootFinder::default();
        assert_eq!(render_surface(&ray_z(), &field, &ConstantColor(c), &f), Some(c));
        let miss = Ray::new(Vec3::new(0.0, 2.0, -2.0), Vec3::z(), 0.05, 4.0).unwrap();
        assert_eq!(render_surface(&miss, &field, &ConstantColor(c), &f), None);
    }
}
