//! Command-line interface: `synth`, `train`, `render`, `extract` and `eval`.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::mesher::{chamfer, extract_mesh, sample_points, Bounds, ExtractOptions, TriMesh};
use crate::rng;
use crate::scene::{psnr, render_view, Image, SceneDataset, SynthScene};
use crate::render::{RenderOptions, RootFinder};
use crate::trainer::{IterationMetrics, MetricsWindow, TrainConfig, TrainMode, Trainer};

/// File name of the latest checkpoint inside a training output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
/// File name of the metrics log inside a training output directory.
pub const METRICS_FILE: &str = "metrics.csv";
/// Iterations averaged into one metrics line.
pub const LOG_EVERY: u64 = 100;

#[derive(Parser, Debug)]
#[command(name = "unisurf", version, about = "Neural implicit surfaces from posed images")]
pub struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic scene file into a posed-image dataset.
    Synth(SynthArgs),
    /// Fit the occupancy and color networks to a dataset.
    Train(TrainArgs),
    /// Render one camera of a dataset from a checkpoint.
    Render(RenderArgs),
    /// Extract the 0.5 level set of a checkpoint as a triangle mesh.
    Extract(ExtractArgs),
    /// Chamfer distance between two meshes.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scene description (TOML).
    pub scene: PathBuf,
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub views: usize,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 64)]
    pub res: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coarsest grid of the ground-truth mesh.
    #[arg(long, default_value_t = 64)]
    pub mesh_res: u32,
    /// Refinements of the ground-truth mesh grid.
    #[arg(long, default_value_t = 3)]
    pub mesh_steps: u32,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    /// Training configuration (TOML).
    pub config: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides the configured mode.
    #[arg(long)]
    pub mode: Option<TrainMode>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RenderModeArg {
    Volume,
    Surface,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    pub checkpoint: PathBuf,
    /// Dataset directory or cameras file holding the camera.
    pub cameras: PathBuf,
    /// Index of the camera within the cameras file.
    #[arg(long, default_value_t = 0)]
    pub view: usize,
    #[arg(long, value_enum, default_value_t = RenderModeArg::Surface)]
    pub mode: RenderModeArg,
    /// Interval half-width for volume rendering; defaults to the trained minimum.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Image to report PSNR against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    pub checkpoint: PathBuf,
    /// Voxels per side of the coarsest grid.
    #[arg(long, default_value_t = 64)]
    pub res: u32,
    /// Grid refinements.
    #[arg(long, default_value_t = 3)]
    pub steps: u32,
    /// Half side of the extraction cube.
    #[arg(long, default_value_t = 1.0)]
    pub bound: f64,
    /// Output mesh, `.ply` or `.obj`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub mesh: PathBuf,
    pub gt_mesh: PathBuf,
    /// Surface samples per mesh.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli, &mut std::io::stdout()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        // Fails only when a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Synth(a) => synth(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Render(a) => render(&a, out),
        Command::Extract(a) => extract(&a, out),
        Command::Eval(a) => eval(&a, out),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn say(out: &mut dyn Write, line: String) -> Result<()> {
    writeln!(out, "{line}").map_err(io_err(Path::new("<stdout>")))
}

pub fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let scene = SynthScene::load(&a.scene)?;
    let options = ExtractOptions {
        initial_res: a.mesh_res,
        upsample_steps: a.mesh_steps,
    };
    let (dataset, mesh) = scene.dataset(a.views, a.res, options, &mut rng::stream(a.seed, 0))?;
    dataset.save(&a.out_dir)?;
    let mesh_path = a.out_dir.join("gt_mesh.ply");
    mesh.save(&mesh_path)?;
    say(
        out,
        format!(
            "wrote {} views to {} and {} triangles to {}",
            dataset.views.len(),
            a.out_dir.display(),
            mesh.triangles.len(),
            mesh_path.display()
        ),
    )
}

pub fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let dataset = SceneDataset::load(&a.dataset)?;
    let mut config = TrainConfig::load(&a.config)?;
    if let Some(mode) = a.mode {
        config.mode = mode;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let mut trainer = match &a.resume {
        Some(path) => match Checkpoint::load(path)? {
            Checkpoint {
                fields,
                train: Some((_, state)),
            } => Trainer::resume(fields, config, Some(state))?,
            _ => return Err(Error::data(path, "checkpoint holds no training state")),
        },
        None => Trainer::new(config)?,
    };
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let ckpt_path = a.out_dir.join(CHECKPOINT_FILE);
    let log_path = a.out_dir.join(METRICS_FILE);
    let resumed = a.resume.is_some() && log_path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(resumed)
        .write(true)
        .truncate(!resumed)
        .open(&log_path)
        .map_err(io_err(&log_path))?;
    let mut log = BufWriter::new(file);
    if !resumed {
        writeln!(log, "{}", IterationMetrics::CSV_HEADER).map_err(io_err(&log_path))?;
    }

    let start = Instant::now();
    let every = trainer.config.checkpoint_every;
    let mut window = MetricsWindow::default();
    trainer.fit(&dataset, |t, m| {
        window.push(m);
        let done = m.iteration + 1;
        if done % LOG_EVERY == 0 || t.is_done() {
            let line = window.drain(m).csv();
            writeln!(log, "{line}").map_err(io_err(&log_path))?;
            log.flush().map_err(io_err(&log_path))?;
            say(out, line)?;
        }
        if done % every == 0 {
            Checkpoint::of_trainer(t).save(&ckpt_path)?;
        }
        Ok(true)
    })?;
    Checkpoint::of_trainer(&trainer).save(&ckpt_path)?;
    say(
        out,
        format!(
            "trained {} iterations in {:.1} s; checkpoint at {}",
            trainer.state.iteration,
            start.elapsed().as_secs_f64(),
            ckpt_path.display()
        ),
    )
}

fn load_cameras(path: &Path) -> Result<SceneDataset> {
    if path.is_dir() {
        SceneDataset::load(path)
    } else {
        SceneDataset::load_cameras(path)
    }
}

pub fn render(a: &RenderArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let cameras = load_cameras(&a.cameras)?;
    let view = cameras.views.get(a.view).ok_or_else(|| {
        Error::Usage(format!("view {} requested but {} has {}", a.view, a.cameras.display(), cameras.views.len()))
    })?;
    let trained = ckpt.train.as_ref().map(|(c, _)| c);
    let finder = trained.map_or_else(RootFinder::default, TrainConfig::root_finder);
    let mut options = match a.mode {
        RenderModeArg::Surface => RenderOptions::surface(),
        RenderModeArg::Volume => {
            let delta = a.delta.or(trained.map(|c| c.delta_min)).unwrap_or(0.05);
            let (n, free) = trained.map_or((64, 32), |c| (c.n, c.n_free));
            RenderOptions::volume(delta, n, free)
        }
    };
    options.finder = finder;
    options.background = trained.map_or([0.0; 3], |c| c.background);

    let start = Instant::now();
    let f = &ckpt.fields;
    let image = render_view(&view.camera, cameras.scene_bound, &f.occupancy, &f.color, &options, a.seed);
    let seconds = start.elapsed().as_secs_f64();
    image.save_png(&a.out)?;
    say(out, format!("rendered {} in {seconds:.3} s", a.out.display()))?;
    if let Some(reference) = &a.reference {
        let reference = Image::load_png(reference)?;
        say(out, format!("psnr {:.3} dB", psnr(&image.quantized(), &reference)?))?;
    }
    Ok(())
}

pub fn extract(a: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    if !(a.bound > 0.0) {
        return Err(Error::Usage("--bound must be positive".into()));
    }
    let options = ExtractOptions {
        initial_res: a.res,
        upsample_steps: a.steps,
    };
    let mesh = extract_mesh(&ckpt.fields.occupancy, Bounds::cube(a.bound), options)?;
    if mesh.is_empty() {
        eprintln!("warning: the occupancy field has no 0.5 crossing inside the box; writing an empty mesh");
    }
    mesh.save(&a.out)?;
    say(
        out,
        format!(
            "wrote {} vertices and {} triangles to {} (watertight: {})",
            mesh.vertices.len(),
            mesh.triangles.len(),
            a.out.display(),
            mesh.is_watertight()
        ),
    )
}

pub fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let load = |p: &Path| -> Result<TriMesh> {
        let mesh = TriMesh::load(p)?;
        if mesh.is_empty() {
            return Err(Error::data(p, "mesh has no triangles"));
        }
        Ok(mesh)
    };
    let (mesh, gt) = (load(&a.mesh)?, load(&a.gt_mesh)?);
    let pa = sample_points(&mesh, a.samples, &mut rng::stream(a.seed, 0))?;
    let pb = sample_points(&gt, a.samples, &mut rng::stream(a.seed, 0))?;
    let report = chamfer(&pa, &pb)?;
    say(out, format!("chamfer {:.6}", report.symmetric))?;
    say(out, format!("mesh_to_gt {:.6}", report.a_to_b))?;
    say(out, format!("gt_to_mesh {:.6}", report.b_to_a))
}
