//! Alpha compositing of occupancies against the density quadrature.
//!
//! `cargo run --release --example quadrature`

use unisurf::render::{composite_weights, render_volume_alpha, render_volume_density, DensitySamples};

fn main() -> unisurf::Result<()> {
    let n = 64;
    let samples = DensitySamples {
        sigma: (0..n).map(|i| if i > 40 { 30.0 } else { 0.1 * i as f64 / n as f64 }).collect(),
        delta: vec![4.0 / n as f64; n],
        colors: (0..n).map(|i| [i as f64 / n as f64, 0.5, 1.0 - i as f64 / n as f64]).collect(),
    };
    let a = render_volume_density(&samples)?;
    let b = render_volume_alpha(&samples)?;
    println!("density quadrature {a:.6?}");
    println!("alpha compositing  {b:.6?}");

    let mut occupancy = vec![0.0; n];
    occupancy[20..].fill(1.0);
    let w = composite_weights(&occupancy)?;
    let first = w.iter().position(|&x| x > 0.0);
    println!("binary occupancy: weight {} at sample {:?}, total {}", w[20], first, w.iter().sum::<f64>());
    Ok(())
}
