//! Chamfer distance between meshes of two concentric spheres.
//!
//! `cargo run --release --example chamfer_eval`

use unisurf::fields::analytic::SphereField;
use unisurf::mesher::{chamfer, chamfer_brute_force, extract_mesh, sample_points, Bounds, ExtractOptions};
use unisurf::rng;

fn main() -> unisurf::Result<()> {
    let opts = ExtractOptions { initial_res: 32, upsample_steps: 1 };
    let reference = extract_mesh(&SphereField::new(0.5, 50.0), Bounds::cube(1.0), opts)?;
    let gt = sample_points(&reference, 20_000, &mut rng::stream(0, 0))?;
    for radius in [0.5, 0.51, 0.55, 0.6] {
        let mesh = extract_mesh(&SphereField::new(radius, 50.0), Bounds::cube(1.0), opts)?;
        let pts = sample_points(&mesh, 20_000, &mut rng::stream(1, 0))?;
        let report = chamfer(&pts, &gt)?;
        println!(
            "radius {radius}: chamfer {:.4} (mesh->gt {:.4}, gt->mesh {:.4}), offset {:.4}",
            report.symmetric,
            report.a_to_b,
            report.b_to_a,
            radius - 0.5
        );
    }
    let small_a = sample_points(&reference, 500, &mut rng::stream(2, 0))?;
    let small_b = sample_points(&reference, 500, &mut rng::stream(3, 0))?;
    println!(
        "kd-tree {:.6} vs brute force {:.6}",
        chamfer(&small_a, &small_b)?.symmetric,
        chamfer_brute_force(&small_a, &small_b)?.symmetric
    );
    Ok(())
}
