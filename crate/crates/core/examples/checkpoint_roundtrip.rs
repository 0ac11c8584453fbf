//! Saves fields to a checkpoint and renders identically after reloading.
//!
//! `cargo run --release --example checkpoint_roundtrip`

use unisurf::checkpoint::Checkpoint;
use unisurf::fields::{FieldConfig, Fields, Vec3};
use unisurf::render::RenderOptions;
use unisurf::scene::{render_view, Camera};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fields = Fields::new(FieldConfig::desk(), 7)?;
    let path = std::env::temp_dir().join("unisurf_example.bin");
    Checkpoint::of_fields(fields.clone()).save(&path)?;
    let loaded = Checkpoint::load(&path)?.fields;
    println!("{} bytes, parameters equal: {}", std::fs::metadata(&path)?.len(), loaded == fields);

    let camera = Camera::look_at(Vec3::new(0.0, 0.5, 2.0), Vec3::zeros(), Vec3::y(), 40.0, 32, 32)?;
    let render = |f: &Fields| render_view(&camera, 1.0, &f.occupancy, &f.color, &RenderOptions::surface(), 0);
    println!("renders identical: {}", render(&fields) == render(&loaded));
    std::fs::remove_file(&path)?;
    Ok(())
}
