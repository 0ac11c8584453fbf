use std::path::Path;

use unisurf::mesher::ExtractOptions;
use unisurf::rng;
use unisurf::scene::{SceneDataset, SynthScene};
use unisurf::trainer::{TrainConfig, TrainMode, Trainer};

fn smoke() -> TrainConfig {
    TrainConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/smoke.toml")).unwrap()
}

fn dataset(views: usize, res: u32) -> SceneDataset {
    let opts = ExtractOptions { initial_res: 8, upsample_steps: 0 };
    let (mut data, _) = SynthScene::sphere_on_table().dataset(views.max(2), res, opts, &mut rng::stream(0, 0)).unwrap();
    data.views.truncate(views);
    data
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn single_view_reconstruction_loss_halves() {
    let data = dataset(1, 16);
    let config = TrainConfig { total_iters: 2000, lr_decay_steps: vec![], ..smoke() };
    let mut trainer = Trainer::new(config).unwrap();
    let mut losses = Vec::new();
    trainer
        .fit(&data, |_, m| {
            losses.push(m.l_rec);
            Ok(true)
        })
        .unwrap();
    let (first, last) = (mean(&losses[..100]), mean(&losses[losses.len() - 100..]));
    assert!(last <= 0.5 * first, "first {first} last {last}");
}

#[test]
fn same_seed_gives_identical_parameters() {
    let data = dataset(2, 16);
    let run = |seed| {
        let mut t = Trainer::new(TrainConfig { total_iters: 100, seed, ..smoke() }).unwrap();
        t.fit(&data, |_, _| Ok(true)).unwrap();
        t.fields
    };
    let a = run(0);
    assert_eq!(a, run(0));
    assert_ne!(a, run(1));
}

#[test]
fn learning_rate_drops_at_the_decay_step() {
    let data = dataset(2, 8);
    let config = TrainConfig { total_iters: 6, lr_decay_steps: vec![3], ..smoke() };
    let lr = config.lr;
    let mut trainer = Trainer::new(config).unwrap();
    let mut seen = Vec::new();
    trainer
        .fit(&data, |_, m| {
            seen.push(m.lr);
            Ok(true)
        })
        .unwrap();
    assert_eq!(seen, [lr, lr, lr, lr * 0.1, lr * 0.1, lr * 0.1]);
}

#[test]
fn zero_iterations_leave_the_fields_untouched() {
    let data = dataset(2, 8);
    for mode in [TrainMode::Unisurf, TrainMode::SrOnly, TrainMode::UniformVr, TrainMode::NoReg] {
        let mut trainer = Trainer::new(TrainConfig { total_iters: 0, mode, ..smoke() }).unwrap();
        let before = trainer.fields.clone();
        let mut calls = 0;
        trainer
            .fit(&data, |_, _| {
                calls += 1;
                Ok(true)
            })
            .unwrap();
        assert_eq!(calls, 0);
        assert_eq!(trainer.fields, before);
    }
}

#[test]
fn the_callback_can_stop_training_early() {
    let data = dataset(2, 8);
    let mut trainer = Trainer::new(TrainConfig { total_iters: 50, ..smoke() }).unwrap();
    trainer.fit(&data, |_, m| Ok(m.iteration < 4)).unwrap();
    assert_eq!(trainer.state.iteration, 5);
    assert!(!trainer.is_done());
}
