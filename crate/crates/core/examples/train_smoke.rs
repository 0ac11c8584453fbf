//! Trains the tiny model on a small synthetic dataset and reports the
//! Chamfer distance of the extracted surface.
//!
//! `cargo run --release --example train_smoke -- [mode] [iterations]`

use unisurf::mesher::{chamfer, extract_mesh, sample_points, Bounds, ExtractOptions};
use unisurf::rng;
use unisurf::scene::SynthScene;
use unisurf::trainer::{MetricsWindow, TrainConfig, Trainer};

fn main() -> unisurf::Result<()> {
    let mut args = std::env::args().skip(1);
    let mode = args.next().unwrap_or_else(|| "unisurf".into()).parse()?;
    let total_iters = args.next().map_or(Ok(1000), |s| s.parse()).map_err(|e| unisurf::Error::Usage(format!("{e}")))?;
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/smoke.toml");
    let config = TrainConfig { mode, total_iters, lr_decay_steps: vec![total_iters * 3 / 4], ..TrainConfig::load(&path)? };

    let opts = ExtractOptions { initial_res: 32, upsample_steps: 1 };
    let (dataset, gt) = SynthScene::sphere_on_table().dataset(12, 32, opts, &mut rng::stream(0, 0))?;
    let mut trainer = Trainer::new(config)?;
    let mut window = MetricsWindow::default();
    println!("{}", unisurf::trainer::IterationMetrics::CSV_HEADER);
    trainer.fit(&dataset, |_, m| {
        window.push(m);
        if (m.iteration + 1) % 100 == 0 {
            println!("{}", window.drain(m).csv());
        }
        Ok(true)
    })?;

    let mesh = extract_mesh(&trainer.fields.occupancy, Bounds::cube(dataset.scene_bound), opts)?;
    if mesh.is_empty() {
        println!("extracted mesh is empty");
        return Ok(());
    }
    let a = sample_points(&mesh, 5000, &mut rng::stream(1, 0))?;
    let b = sample_points(&gt, 5000, &mut rng::stream(1, 0))?;
    println!("chamfer {:.4}", chamfer(&a, &b)?.symmetric);
    Ok(())
}
