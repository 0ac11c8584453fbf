//! Multiresolution isosurface extraction.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::cases::{table, EDGES};
use super::TriMesh;
use crate::error::{Error, Result};
use crate::fields::{OccupancyModel, Vec3};

const LEVEL: f64 = 0.5;
/// Points per parallel field evaluation.
const EVAL_BLOCK: usize = 4096;

type Key = [u32; 3];

/// Axis-aligned extraction box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn cube(half_extent: f64) -> Self {
        Self {
            min: Vec3::repeat(-half_extent),
            max: Vec3::repeat(half_extent),
        }
    }
}

/// Grid resolution schedule: `initial_res` voxels per axis, doubled
/// `upsample_steps` times around the surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtractOptions {
    pub initial_res: u32,
    pub upsample_steps: u32,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            initial_res: 64,
            upsample_steps: 3,
        }
    }
}

impl ExtractOptions {
    pub fn final_res(&self) -> u32 {
        self.initial_res << self.upsample_steps
    }
}

struct Grid<'a, M: ?Sized> {
    model: &'a M,
    bounds: Bounds,
    res: u32,
    values: HashMap<Key, f64>,
}

impl<M: OccupancyModel + ?Sized> Grid<'_, M> {
    fn point(&self, k: Key) -> Vec3 {
        let ext = self.bounds.max - self.bounds.min;
        let r = self.res as f64;
        self.bounds.min
            + Vec3::new(
                ext.x * k[0] as f64 / r,
                ext.y * k[1] as f64 / r,
                ext.z * k[2] as f64 / r,
            )
    }

    fn evaluate(&mut self, keys: impl IntoIterator<Item = Key>) {
        let mut missing: Vec<Key> = keys
            .into_iter()
            .filter(|k| !self.values.contains_key(k))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        let points: Vec<Vec3> = missing.iter().map(|&k| self.point(k)).collect();
        let vals: Vec<f64> = points
            .par_chunks(EVAL_BLOCK)
            .flat_map_iter(|c| self.model.occupancy(c))
            .collect();
        self.values.extend(missing.into_iter().zip(vals));
    }

    /// Corner keys of the voxel `v` at cell size `step`.
    fn corners(v: Key, step: u32) -> [Key; 8] {
        std::array::from_fn(|i| {
            [
                (v[0] + (i as u32 & 1)) * step,
                (v[1] + ((i as u32 >> 1) & 1)) * step,
                (v[2] + ((i as u32 >> 2) & 1)) * step,
            ]
        })
    }

    fn mask(&self, v: Key, step: u32) -> u8 {
        Self::corners(v, step)
            .iter()
            .enumerate()
            .fold(0, |m, (i, k)| if self.values[k] >= LEVEL { m | (1 << i) } else { m })
    }
}

fn neighbours(v: Key, cells: u32) -> impl Iterator<Item = Key> {
    let range = |c: u32| c.saturating_sub(1)..=(c + 1).min(cells - 1);
    let (rx, ry, rz) = (range(v[0]), range(v[1]), range(v[2]));
    rx.flat_map(move |x| {
        let rz = rz.clone();
        ry.clone().flat_map(move |y| rz.clone().map(move |z| [x, y, z]))
    })
}

/// Marching-cubes mesh of the 0.5 level set of `model` inside `bounds`.
///
/// The coarse grid is refined only around voxels whose corners straddle the
/// level (plus a one-voxel ring). At the final resolution the straddling
/// set is grown across every face that carries a sign change, so the
/// surface is closed wherever it does not leave the box.
pub fn extract_mesh<M: OccupancyModel + ?Sized>(
    model: &M,
    bounds: Bounds,
    options: ExtractOptions,
) -> Result<TriMesh> {
    if options.initial_res < 2 {
        return Err(Error::Config(format!(
            "initial resolution must be at least 2, got {}",
            options.initial_res
        )));
    }
    if !(0..3).all(|a| bounds.max[a] > bounds.min[a]) {
        return Err(Error::Config("extraction bounds are empty".into()));
    }
    let res = options.final_res();
    let mut grid = Grid {
        model,
        bounds,
        res,
        values: HashMap::new(),
    };

    // Coarse pass over every voxel.
    let mut cells = options.initial_res;
    let mut step = 1u32 << options.upsample_steps;
    let mut voxels: Vec<Key> = (0..cells)
        .flat_map(|x| (0..cells).flat_map(move |y| (0..cells).map(move |z| [x, y, z])))
        .collect();
    grid.evaluate(voxels.iter().flat_map(|&v| Grid::<M>::corners(v, step)));

    for _ in 0..options.upsample_steps {
        let active: HashSet<Key> = voxels
            .iter()
            .filter(|&&v| !matches!(grid.mask(v, step), 0 | 255))
            .flat_map(|&v| neighbours(v, cells))
            .collect();
        let mut parents: Vec<Key> = active.into_iter().collect();
        parents.sort_unstable();
        voxels = parents
            .iter()
            .flat_map(|p| (0..8u32).map(move |i| [2 * p[0] + (i & 1), 2 * p[1] + ((i >> 1) & 1), 2 * p[2] + ((i >> 2) & 1)]))
            .collect();
        cells *= 2;
        step /= 2;
        grid.evaluate(voxels.iter().flat_map(|&v| Grid::<M>::corners(v, step)));
    }

    // Grow across faces with sign changes until the surface is closed.
    let mut seen: HashSet<Key> = voxels.iter().copied().collect();
    let mut surface: Vec<Key> = Vec::new();
    let mut frontier: Vec<Key> = voxels;
    while !frontier.is_empty() {
        grid.evaluate(frontier.iter().flat_map(|&v| Grid::<M>::corners(v, 1)));
        let mut next = Vec::new();
        for v in frontier {
            let mask = grid.mask(v, 1);
            if matches!(mask, 0 | 255) {
                continue;
            }
            surface.push(v);
            for (axis, bits) in [(0usize, 1u8), (1, 2), (2, 4)] {
                for (side, delta) in [(false, -1i64), (true, 1)] {
                    let face: Vec<bool> = (0..8)
                        .filter(|&i| ((i & bits) != 0) == side)
                        .map(|i| mask & (1 << i) != 0)
                        .collect();
                    if face.iter().all(|&b| b) || face.iter().all(|&b| !b) {
                        continue;
                    }
                    let c = v[axis] as i64 + delta;
                    if c < 0 || c >= res as i64 {
                        continue;
                    }
                    let mut n = v;
                    n[axis] = c as u32;
                    if seen.insert(n) {
                        next.push(n);
                    }
                }
            }
        }
        frontier = next;
    }
    surface.sort_unstable();

    let mut mesh = TriMesh::default();
    let mut vertex_of_edge: HashMap<(Key, Key), u32> = HashMap::new();
    for v in surface {
        let corners = Grid::<M>::corners(v, 1);
        let mask = grid.mask(v, 1);
        for tri in &table()[mask as usize] {
            let idx = tri.map(|e| {
                let (a, b) = EDGES[e as usize];
                let (ka, kb) = (corners[a], corners[b]);
                let key = if ka < kb { (ka, kb) } else { (kb, ka) };
                *vertex_of_edge.entry(key).or_insert_with(|| {
                    let (oa, ob) = (grid.values[&key.0], grid.values[&key.1]);
                    let t = ((LEVEL - oa) / (ob - oa)).clamp(0.0, 1.0);
                    let p = grid.point(key.0) * (1.0 - t) + grid.point(key.1) * t;
                    mesh.vertices.push(p);
                    (mesh.vertices.len() - 1) as u32
                })
            });
            mesh.triangles.push(idx);
        }
    }
    mesh.drop_degenerate();
    Ok(mesh)
}
