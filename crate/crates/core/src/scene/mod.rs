//! Cameras, posed-image datasets and synthetic ground truth.

mod camera;
mod dataset;
mod image;
mod synth;

pub use camera::{Camera, T_NEAR};
pub use dataset::{SceneDataset, View, CAMERAS_FILE};
pub use image::{psnr, Image};
pub use synth::{Hit, Primitive, SceneOccupancy, SynthScene};

use rayon::prelude::*;

use crate::fields::{ColorModel, OccupancyModel};
use crate::render::{render_rays, RenderOptions};
use crate::rng;

/// Rays rendered per batched field evaluation.
const RAY_BLOCK: usize = 1024;

/// Renders every pixel of `camera`. Block `b` of rays draws its samples from
/// `rng::stream(seed, b)`, so the image does not depend on the thread count.
pub fn render_view<O, C>(
    camera: &Camera,
    scene_bound: f64,
    occupancy: &O,
    color: &C,
    options: &RenderOptions,
    seed: u64,
) -> Image
where
    O: OccupancyModel + ?Sized,
    C: ColorModel + ?Sized,
{
    let rays = camera.rays(scene_bound);
    let blocks: Vec<Vec<[f64; 3]>> = rays
        .par_chunks(RAY_BLOCK)
        .enumerate()
        .map(|(b, block)| render_rays(block, occupancy, color, options, &mut rng::stream(seed, b as u64)))
        .collect();
    Image::new(camera.width, camera.height, blocks.concat()).expect("one pixel per ray")
}
