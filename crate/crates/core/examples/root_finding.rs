//! Secant root finding against bisection along rays through a sphere.
//!
//! `cargo run --release --example root_finding`

use unisurf::fields::analytic::SphereField;
use unisurf::fields::Vec3;
use unisurf::render::{bisect_depth, Ray, RootFinder};
use unisurf::Result;

fn main() -> Result<()> {
    let sphere = SphereField::new(0.5, 100.0);
    let origin = Vec3::new(0.0, 0.0, 2.0);
    let rays: Vec<Ray> = (0..8)
        .map(|i| {
            let target = Vec3::new(0.06 * i as f64, 0.0, 0.0);
            Ray::new(origin, (target - origin).normalize(), 0.05, 4.0)
        })
        .collect::<Result<_>>()?;
    for steps in [0, 2, 8] {
        let finder = RootFinder { secant_steps: steps, ..RootFinder::default() };
        let depths = finder.depths(&rays, &sphere);
        let worst = rays
            .iter()
            .zip(&depths)
            .filter_map(|(r, t)| Some((t.as_ref()? - bisect_depth(r, &sphere, 256, 80)?).abs()))
            .fold(0.0f64, f64::max);
        println!("{steps} secant steps: worst deviation from bisection {worst:.2e}");
    }
    for (r, t) in rays.iter().zip(RootFinder::default().depths(&rays, &sphere)) {
        match t {
            Some(t) => println!("hit at depth {t:.6}, |x| = {:.6}", r.at(t).norm()),
            None => println!("miss"),
        }
    }
    Ok(())
}
