//! Hierarchical marching cubes on an analytic sphere.
//!
//! `cargo run --release --example extract_mesh`

use std::f64::consts::PI;
use std::time::Instant;

use unisurf::fields::analytic::SphereField;
use unisurf::mesher::{extract_mesh, Bounds, ExtractOptions};

fn main() -> unisurf::Result<()> {
    let radius = 0.5;
    let field = SphereField::new(radius, 50.0);
    for steps in 0..=3 {
        let opts = ExtractOptions { initial_res: 16, upsample_steps: steps };
        let start = Instant::now();
        let mesh = extract_mesh(&field, Bounds::cube(1.0), opts)?;
        println!(
            "res {:>3}: {:>6} triangles, area error {:.2e}, volume error {:.2e}, watertight {}, {:.3}s",
            opts.final_res(),
            mesh.triangles.len(),
            (mesh.area() / (4.0 * PI * radius * radius) - 1.0).abs(),
            (mesh.signed_volume() / (4.0 / 3.0 * PI * radius.powi(3)) - 1.0).abs(),
            mesh.is_watertight(),
            start.elapsed().as_secs_f64()
        );
    }
    let mesh = extract_mesh(&field, Bounds::cube(1.0), ExtractOptions { initial_res: 16, upsample_steps: 2 })?;
    mesh.save(std::path::Path::new("sphere.obj"))?;
    println!("wrote sphere.obj");
    Ok(())
}
