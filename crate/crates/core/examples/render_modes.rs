//! Surface and volume rendering of the same analytic occupancy field.
//!
//! `cargo run --release --example render_modes`

use std::time::Instant;

use unisurf::fields::analytic::{SmoothColor, SphereField};
use unisurf::fields::Vec3;
use unisurf::render::RenderOptions;
use unisurf::scene::{psnr, render_view, Camera};

fn main() -> unisurf::Result<()> {
    let occupancy = SphereField::new(0.6, 200.0);
    let color = SmoothColor { frequency: 4.0 };
    let camera = Camera::look_at(Vec3::new(0.0, 0.8, 2.0), Vec3::zeros(), Vec3::y(), 80.0, 96, 96)?;

    let start = Instant::now();
    let surface = render_view(&camera, 1.0, &occupancy, &color, &RenderOptions::surface(), 0);
    println!("surface: {:.3}s", start.elapsed().as_secs_f64());
    surface.save_png(std::path::Path::new("render_surface.png"))?;

    for delta in [1.0, 0.2, 0.05] {
        let start = Instant::now();
        let volume = render_view(&camera, 1.0, &occupancy, &color, &RenderOptions::volume(delta, 32, 16), 0);
        println!(
            "volume delta {delta}: {:.3}s, psnr against surface {:.2} dB",
            start.elapsed().as_secs_f64(),
            psnr(&volume, &surface)?
        );
    }
    Ok(())
}
