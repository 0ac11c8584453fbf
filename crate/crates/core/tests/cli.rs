use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use unisurf::checkpoint::Checkpoint;
use unisurf::cli::{self, Cli, CHECKPOINT_FILE, METRICS_FILE};
use unisurf::fields::{FieldConfig, Fields};
use unisurf::mesher::TriMesh;
use unisurf::trainer::TrainConfig;
use unisurf::Error;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

fn run(args: &[&str]) -> Result<String, Error> {
    let cli = Cli::try_parse_from(std::iter::once("unisurf").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    cli::run(cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    let scene = data("sphere_on_table.toml");
    run(&[
        "synth", s(&scene), s(dir), "--views", "4", "--res", "16", "--seed", seed, "--mesh-res", "16", "--mesh-steps", "1",
    ])
    .unwrap();
}

fn smoke_config(dir: &Path, total_iters: u64, checkpoint_every: u64) -> PathBuf {
    let config = TrainConfig {
        total_iters,
        checkpoint_every,
        ..TrainConfig::load(&data("smoke.toml")).unwrap()
    };
    let path = dir.join(format!("config_{total_iters}.toml"));
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut pending = vec![root.to_path_buf()];
    while let Some(dir) = pending.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                pending.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_a_reproducible_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, "3");
    synth(&b, "3");
    let names: Vec<String> = files_under(&a).iter().map(|(p, _)| p.display().to_string()).collect();
    assert_eq!(
        names,
        ["cameras.json", "gt_mesh.ply", "images/000.png", "images/001.png", "images/002.png", "images/003.png"]
    );
    assert_eq!(files_under(&a), files_under(&b));
    let c = tmp.path().join("c");
    synth(&c, "4");
    assert_ne!(files_under(&a), files_under(&c));
}

#[test]
fn bad_scene_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("sphere_on_table.toml")).unwrap().replace("radius", "radios");
    let scene = tmp.path().join("bad.toml");
    std::fs::write(&scene, text).unwrap();
    let err = run(&["synth", s(&scene), s(tmp.path())]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("radios"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    let status = Command::new(env!("CARGO_BIN_EXE_unisurf"))
        .args(["render", "a.bin", "cams", "--mode", "sideways", "--out", "x.png"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(env!("CARGO_BIN_EXE_unisurf")).args(["train", "--bogus"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_unisurf"))
        .args(["train", s(&tmp.path().join("none")), s(&data("smoke.toml")), s(&tmp.path().join("out"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_iterations_checkpoint_the_initialized_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("data");
    synth(&dataset, "0");
    let config = smoke_config(tmp.path(), 0, 50);
    let out = tmp.path().join("run");
    run(&["train", s(&dataset), s(&config), s(&out)]).unwrap();
    let ckpt = Checkpoint::load(&out.join(CHECKPOINT_FILE)).unwrap();
    let cfg = TrainConfig::load(&config).unwrap();
    assert_eq!(ckpt.fields, Fields::new(cfg.model, cfg.seed).unwrap());
    assert_eq!(ckpt.train.unwrap().1.iteration, 0);
}

#[test]
fn resumed_training_continues_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("data");
    synth(&dataset, "0");
    let full = smoke_config(tmp.path(), 6, 100);
    let half = smoke_config(tmp.path(), 3, 100);
    let (straight, split) = (tmp.path().join("straight"), tmp.path().join("split"));
    run(&["train", s(&dataset), s(&full), s(&straight)]).unwrap();
    run(&["train", s(&dataset), s(&half), s(&split)]).unwrap();
    let resume_from = tmp.path().join("half.bin");
    std::fs::copy(split.join(CHECKPOINT_FILE), &resume_from).unwrap();
    run(&["train", s(&dataset), s(&full), s(&split), "--resume", s(&resume_from)]).unwrap();

    let a = Checkpoint::load(&straight.join(CHECKPOINT_FILE)).unwrap();
    let b = Checkpoint::load(&split.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(a.fields, b.fields);
    assert_eq!(a.train.unwrap().1, b.train.unwrap().1);
    let log = std::fs::read_to_string(straight.join(METRICS_FILE)).unwrap();
    assert!(log.starts_with("iteration,l_rec,l_reg,delta,lr\n"), "{log}");
}

#[test]
fn renders_are_deterministic_and_report_psnr() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("data");
    synth(&dataset, "0");
    let ckpt = tmp.path().join("init.bin");
    Checkpoint::of_fields(Fields::new(FieldConfig::tiny(), 0).unwrap()).save(&ckpt).unwrap();
    let reference = dataset.join("images/001.png");
    for mode in ["surface", "volume"] {
        let (a, b) = (tmp.path().join(format!("{mode}_a.png")), tmp.path().join(format!("{mode}_b.png")));
        for out in [&a, &b] {
            let text = run(&[
                "render", s(&ckpt), s(&dataset), "--view", "1", "--mode", mode, "--out", s(out), "--reference", s(&reference),
            ])
            .unwrap();
            assert!(text.contains("psnr"), "{text}");
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
    let err = run(&["render", s(&ckpt), s(&dataset), "--view", "9", "--out", s(&tmp.path().join("x.png"))]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn extracted_ply_and_obj_hold_the_same_watertight_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = tmp.path().join("init.bin");
    Checkpoint::of_fields(Fields::new(FieldConfig::tiny(), 0).unwrap()).save(&ckpt).unwrap();
    let (ply, obj) = (tmp.path().join("m.ply"), tmp.path().join("m.obj"));
    for out in [&ply, &obj] {
        run(&["extract", s(&ckpt), "--res", "16", "--steps", "1", "--out", s(out)]).unwrap();
    }
    let (a, b) = (TriMesh::load(&ply).unwrap(), TriMesh::load(&obj).unwrap());
    assert_eq!(a, b);
    assert!(!a.is_empty() && a.is_watertight());
}

#[test]
fn empty_field_extracts_an_empty_mesh_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let mut fields = Fields::new(FieldConfig::tiny(), 0).unwrap();
    let last = fields.occupancy.mlp.spec.num_layers() - 1;
    fields.occupancy.mlp.weight_mut(last).fill(0.0);
    fields.occupancy.mlp.bias_mut(last).fill(-50.0);
    let ckpt = tmp.path().join("empty.bin");
    Checkpoint::of_fields(fields).save(&ckpt).unwrap();
    let mesh = tmp.path().join("m.ply");
    let out = Command::new(env!("CARGO_BIN_EXE_unisurf"))
        .args(["extract", s(&ckpt), "--res", "8", "--steps", "0", "--out", s(&mesh)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(TriMesh::load(&mesh).unwrap().is_empty());
}

#[test]
fn eval_reports_zero_for_identical_meshes_and_bounds_a_shift() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = tmp.path().join("init.bin");
    Checkpoint::of_fields(Fields::new(FieldConfig::tiny(), 0).unwrap()).save(&ckpt).unwrap();
    let mesh = tmp.path().join("m.ply");
    run(&["extract", s(&ckpt), "--res", "16", "--steps", "1", "--out", s(&mesh)]).unwrap();
    let same = run(&["eval", s(&mesh), s(&mesh), "--samples", "2000"]).unwrap();
    assert!(same.starts_with("chamfer 0.000000\n"), "{same}");

    let d = 0.1;
    let mut shifted = TriMesh::load(&mesh).unwrap();
    shifted.vertices.iter_mut().for_each(|v| v.x += d);
    let moved = tmp.path().join("moved.obj");
    shifted.save(&moved).unwrap();
    let text = run(&["eval", s(&mesh), s(&moved), "--samples", "2000"]).unwrap();
    let value: f64 = text.lines().next().unwrap().strip_prefix("chamfer ").unwrap().parse().unwrap();
    assert!(value > 0.0 && value <= d, "{value}");
}
