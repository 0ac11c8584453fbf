//! Depth sampling along rays and the shrinking-interval schedule.

use rand::Rng;

use super::Ray;

/// Where a depth sample came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    /// Stratified around the surface estimate.
    Interval,
    /// Between the camera and the interval.
    FreeSpace,
    /// Stratified over the whole ray (no surface found).
    FullRay,
}

/// Sorted depths along a ray.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SamplePlan {
    pub depths: Vec<f64>,
    pub kinds: Vec<SampleKind>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    fn extend(&mut self, depths: impl IntoIterator<Item = f64>, kind: SampleKind) {
        for t in depths {
            self.depths.push(t);
            self.kinds.push(kind);
        }
    }
}

/// One uniform draw per equal-width stratum of `[lo, hi]`.
pub fn stratified<R: Rng + ?Sized>(lo: f64, hi: f64, count: usize, rng: &mut R) -> Vec<f64> {
    let width = (hi - lo) / count as f64;
    (0..count)
        .map(|i| lo + (i as f64 + rng.gen::<f64>()) * width)
        .collect()
}

/// `count` stratified depths in `[t_s - delta, t_s + delta]`, intersected
/// with the ray's `[t_near, t_far]`.
///
/// Stratum `i` (1-based) covers `t_s + ((2i - 2) / N - 1) delta` to
/// `t_s + (2i / N - 1) delta`. When the interval pokes out of the ray bounds
/// the strata are laid over the part that remains, so the result stays
/// strictly increasing and inside the bounds.
pub fn sample_interval<R: Rng + ?Sized>(
    ray: &Ray,
    t_surface: f64,
    delta: f64,
    count: usize,
    rng: &mut R,
) -> SamplePlan {
    let lo = (t_surface - delta).max(ray.t_near);
    let hi = (t_surface + delta).min(ray.t_far);
    let mut plan = SamplePlan::default();
    if count > 0 && hi > lo {
        plan.extend(stratified(lo, hi, count, rng), SampleKind::Interval);
    }
    plan
}

/// Depth samples for one ray.
///
/// With a surface estimate: `interval` samples around it, preceded by
/// `free` uniform samples in `[t_near, t_s - delta]` (none if that range is
/// empty). Without one: `interval + free` stratified samples over the whole
/// ray.
pub fn plan_samples<R: Rng + ?Sized>(
    ray: &Ray,
    surface: Option<f64>,
    delta: f64,
    interval: usize,
    free: usize,
    rng: &mut R,
) -> SamplePlan {
    match surface {
        Some(t_s) => {
            let mut plan = SamplePlan::default();
            let free_end = t_s - delta;
            if free_end > ray.t_near {
                let mut ts: Vec<f64> = (0..free)
                    .map(|_| ray.t_near + rng.gen::<f64>() * (free_end - ray.t_near))
                    .collect();
                ts.sort_by(f64::total_cmp);
                plan.extend(ts, SampleKind::FreeSpace);
            }
            let around = sample_interval(ray, t_s, delta, interval, rng);
            plan.extend(around.depths, SampleKind::Interval);
            plan
        }
        None => full_ray(ray, interval + free, rng),
    }
}

/// Stratified samples over `[t_near, t_far]`.
pub fn full_ray<R: Rng + ?Sized>(ray: &Ray, count: usize, rng: &mut R) -> SamplePlan {
    let mut plan = SamplePlan::default();
    plan.extend(
        stratified(ray.t_near, ray.t_far, count, rng),
        SampleKind::FullRay,
    );
    plan
}

/// Parameters of `delta_k = max(delta_max * exp(-k * beta), delta_min)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalSchedule {
    pub beta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl IntervalSchedule {
    /// Full-scale values.
    pub const FULL_SCALE: IntervalSchedule = IntervalSchedule {
        beta: 1.5e-5,
        delta_min: 0.05,
        delta_max: 1.0,
    };

    /// Half-width of the sampling interval at iteration `k`.
    pub fn delta(&self, k: u64) -> f64 {
        decay_delta(k, self)
    }

    /// `beta` such that the interval reaches `delta_min` at `iteration`.
    pub fn beta_reaching_min_at(delta_min: f64, delta_max: f64, iteration: u64) -> f64 {
        (delta_max / delta_min).ln() / iteration as f64
    }
}

pub fn decay_delta(k: u64, schedule: &IntervalSchedule) -> f64 {
    (schedule.delta_max * (-(k as f64) * schedule.beta).exp()).max(schedule.delta_min)
}
