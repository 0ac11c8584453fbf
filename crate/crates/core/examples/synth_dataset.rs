//! Renders the sphere-on-table scene into a posed image dataset.
//!
//! `cargo run --release --example synth_dataset -- [out_dir]`

use std::path::PathBuf;

use unisurf::mesher::ExtractOptions;
use unisurf::rng;
use unisurf::scene::SynthScene;

fn main() -> unisurf::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_out".into()));
    let scene = SynthScene::sphere_on_table();
    let opts = ExtractOptions { initial_res: 32, upsample_steps: 2 };
    let (dataset, gt) = scene.dataset(8, 64, opts, &mut rng::stream(0, 0))?;
    dataset.save(&out)?;
    gt.save(&out.join("gt_mesh.ply"))?;
    for view in &dataset.views {
        let lit = view.image.pixels.iter().filter(|p| p.iter().any(|c| *c > 0.0)).count();
        println!("{} center {:?} covered {:.1}%", view.name, view.camera.center().as_slice(), 100.0 * lit as f64 / view.image.pixels.len() as f64);
    }
    println!("ground truth: {} vertices, {} triangles, watertight {}", gt.vertices.len(), gt.triangles.len(), gt.is_watertight());
    println!("wrote {}", out.display());
    Ok(())
}
