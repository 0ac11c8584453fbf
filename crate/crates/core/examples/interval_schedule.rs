//! The shrinking sampling interval and the sample plans it produces.
//!
//! `cargo run --release --example interval_schedule`

use unisurf::fields::Vec3;
use unisurf::render::{plan_samples, IntervalSchedule, Ray};
use unisurf::rng;

fn main() -> unisurf::Result<()> {
    let schedule = IntervalSchedule::FULL_SCALE;
    for k in [0, 25_000, 50_000, 100_000, 200_000, 300_000] {
        println!("iteration {k:>7}: delta {:.4}", schedule.delta(k));
    }
    let ray = Ray::new(Vec3::new(0.0, 0.0, 3.0), -Vec3::z(), 0.05, 5.0)?;
    for k in [0, 100_000, 300_000] {
        let delta = schedule.delta(k);
        let plan = plan_samples(&ray, Some(2.5), delta, 8, 4, &mut rng::stream(0, k));
        let depths: Vec<String> = plan.depths.iter().map(|t| format!("{t:.2}")).collect();
        println!("delta {delta:.3}: {}", depths.join(" "));
    }
    let plan = plan_samples(&ray, None, 1.0, 8, 4, &mut rng::stream(0, 0));
    println!("no surface: {} samples over the whole ray", plan.len());
    Ok(())
}
