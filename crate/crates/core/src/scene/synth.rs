//! Analytic scenes: ray-traced ground-truth images and meshes.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Camera, Image, SceneDataset, View};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::fields::{OccupancyModel, PointAttributes, Vec3};
use crate::mesher::{extract_mesh, Bounds, ExtractOptions, TriMesh};
use crate::render::Ray;

const AMBIENT: f64 = 0.1;
const CAMERA_DISTANCE: f64 = 2.0;
const ELEVATION_RANGE_DEG: (f64, f64) = (-35.0, 65.0);
/// Half field of view used for synthetic cameras.
const HALF_FOV_DEG: f64 = 32.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
        albedo: [f64; 3],
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        albedo: [f64; 3],
    },
    /// Solid half space below the plane; `normal` points out of it.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        albedo: [f64; 3],
    },
}

/// Primitives lit by one directional light.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthScene {
    pub primitives: Vec<Primitive>,
    /// Direction toward the light.
    pub light_dir: [f64; 3],
    #[serde(default = "default_bound")]
    pub scene_bound: f64,
}

fn default_bound() -> f64 {
    1.0
}

fn v(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

/// Surface hit of an analytic ray cast.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Outward unit normal, flipped to face the ray.
    pub normal: Vec3,
    pub albedo: [f64; 3],
}

impl Primitive {
    fn albedo(&self) -> [f64; 3] {
        match *self {
            Primitive::Sphere { albedo, .. } | Primitive::Box { albedo, .. } | Primitive::Plane { albedo, .. } => albedo,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            Primitive::Sphere { radius, .. } if !(radius > 0.0) => Err("sphere radius must be positive".into()),
            Primitive::Box { half_extents, .. } if !half_extents.iter().all(|h| *h > 0.0) => {
                Err("box half_extents must be positive".into())
            }
            Primitive::Plane { normal, .. } if !(v(normal).norm() > 0.0) => Err("plane normal must be non-zero".into()),
            _ if !self.albedo().iter().all(|a| (0.0..=1.0).contains(a)) => Err("albedo must lie in [0, 1]".into()),
            _ => Ok(()),
        }
    }

    /// Nearest intersection with `t` in `(lo, hi)`.
    pub fn intersect(&self, ray: &Ray, lo: f64, hi: f64) -> Option<(f64, Vec3)> {
        let (o, d) = (ray.origin, ray.direction);
        match *self {
            Primitive::Sphere { center, radius, .. } => {
                let oc = o - v(center);
                let b = oc.dot(&d);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                [-b - s, -b + s]
                    .into_iter()
                    .find(|&t| t > lo && t < hi)
                    .map(|t| (t, (ray.at(t) - v(center)) / radius))
            }
            Primitive::Box {
                center,
                half_extents,
                ..
            } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                let (mut n0, mut n1) = (Vec3::zeros(), Vec3::zeros());
                for a in 0..3 {
                    let (lo_a, hi_a) = (center[a] - half_extents[a], center[a] + half_extents[a]);
                    if d[a] == 0.0 {
                        if o[a] < lo_a || o[a] > hi_a {
                            return None;
                        }
                        continue;
                    }
                    let (mut ta, mut tb) = ((lo_a - o[a]) / d[a], (hi_a - o[a]) / d[a]);
                    let mut na = -Vec3::ith(a, 1.0);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                        na = -na;
                    }
                    if ta > t0 {
                        t0 = ta;
                        n0 = na;
                    }
                    if tb < t1 {
                        t1 = tb;
                        n1 = -na;
                    }
                }
                if t0 > t1 {
                    return None;
                }
                [(t0, n0), (t1, n1)].into_iter().find(|&(t, _)| t > lo && t < hi)
            }
            Primitive::Plane { point, normal, .. } => {
                let n = v(normal).normalize();
                let denom = d.dot(&n);
                if denom == 0.0 {
                    return None;
                }
                let t = (v(point) - o).dot(&n) / denom;
                (t > lo && t < hi).then_some((t, n))
            }
        }
    }

    /// Signed distance, negative inside.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match *self {
            Primitive::Sphere { center, radius, .. } => (p - v(center)).norm() - radius,
            Primitive::Box {
                center,
                half_extents,
                ..
            } => {
                let q = (p - v(center)).abs() - v(half_extents);
                q.map(|c| c.max(0.0)).norm() + q.max().min(0.0)
            }
            Primitive::Plane { point, normal, .. } => (p - v(point)).dot(&v(normal).normalize()),
        }
    }

    /// Outward unit normal of the nearest surface point.
    pub fn sdf_normal(&self, p: &Vec3) -> Vec3 {
        match *self {
            Primitive::Sphere { center, .. } => (p - v(center)).try_normalize(0.0).unwrap_or_else(Vec3::y),
            Primitive::Box {
                center,
                half_extents,
                ..
            } => {
                let rel = p - v(center);
                let q = rel.abs() - v(half_extents);
                let sign = rel.map(|c| if c < 0.0 { -1.0 } else { 1.0 });
                if q.max() > 0.0 {
                    q.map(|c| c.max(0.0)).component_mul(&sign).normalize()
                } else {
                    Vec3::ith(q.imax(), sign[q.imax()])
                }
            }
            Primitive::Plane { normal, .. } => v(normal).normalize(),
        }
    }
}

impl SynthScene {
    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Config("a scene needs at least one primitive".into()));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate().map_err(|m| Error::Config(format!("primitive {i}: {m}")))?;
        }
        if !(v(self.light_dir).norm() > 0.0) {
            return Err(Error::Config("light_dir must be non-zero".into()));
        }
        if !(self.scene_bound > 0.0) {
            return Err(Error::Config("scene_bound must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scene: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serializable scene")
    }

    /// A table-top box with a sphere resting on it.
    pub fn sphere_on_table() -> Self {
        Self {
            primitives: vec![
                Primitive::Box {
                    center: [0.0, -0.2, 0.0],
                    half_extents: [0.6, 0.1, 0.6],
                    albedo: [0.9, 0.75, 0.55],
                },
                Primitive::Sphere {
                    center: [0.0, 0.15, 0.0],
                    radius: 0.3,
                    albedo: [0.35, 0.55, 0.95],
                },
            ],
            light_dir: [0.45, 0.8, 0.4],
            scene_bound: 1.0,
        }
    }

    /// Height of the table top in [`SynthScene::sphere_on_table`].
    pub const TABLE_TOP: f64 = -0.1;

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for p in &self.primitives {
            let hi = best.map_or(ray.t_far, |b| b.t);
            if let Some((t, n)) = p.intersect(ray, ray.t_near, hi) {
                let normal = if n.dot(&ray.direction) > 0.0 { -n } else { n };
                best = Some(Hit {
                    t,
                    normal,
                    albedo: p.albedo(),
                });
            }
        }
        best
    }

    /// Lambertian shade `(0.1 + max(0, n . l)) * albedo`, clamped to `[0, 1]`.
    pub fn shade(&self, hit: &Hit) -> [f64; 3] {
        let l = v(self.light_dir).normalize();
        let k = AMBIENT + hit.normal.dot(&l).max(0.0);
        hit.albedo.map(|a| (k * a).clamp(0.0, 1.0))
    }

    pub fn trace(&self, ray: &Ray) -> [f64; 3] {
        self.intersect(ray).map_or([0.0; 3], |h| self.shade(&h))
    }

    /// Ray-traced image; misses are black.
    pub fn render(&self, camera: &Camera) -> Image {
        let pixels = camera
            .rays(self.scene_bound)
            .iter()
            .map(|r| self.trace(r))
            .collect();
        Image::new(camera.width, camera.height, pixels).expect("one pixel per ray")
    }

    /// Signed distance to the union of primitives.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|prim| prim.sdf(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Occupancy `clamp(0.5 - sdf / width, 0, 1)`, linear in the distance
    /// within `width / 2` of the surface.
    pub fn occupancy_field(&self, width: f64) -> SceneOccupancy<'_> {
        SceneOccupancy { scene: self, width }
    }

    /// Marching-cubes mesh of the scene inside its bounding cube.
    pub fn ground_truth_mesh(&self, options: ExtractOptions) -> Result<TriMesh> {
        let bounds = Bounds::cube(self.scene_bound);
        let voxel = 2.0 * self.scene_bound / options.final_res() as f64;
        extract_mesh(&self.occupancy_field(4.0 * voxel), bounds, options)
    }

    /// Cameras on a sphere of radius 2 looking at the origin, stratified in
    /// azimuth and elevation.
    pub fn cameras<R: Rng + ?Sized>(n_views: usize, resolution: u32, rng: &mut R) -> Result<Vec<Camera>> {
        if n_views < 2 {
            return Err(Error::Config(format!("need at least 2 views, got {n_views}")));
        }
        if resolution == 0 {
            return Err(Error::Config("resolution must be positive".into()));
        }
        let elevation_strata = ((n_views as f64 / 8.0).ceil() as usize).clamp(1, n_views);
        let focal = resolution as f64 / 2.0 / HALF_FOV_DEG.to_radians().tan();
        let (el_lo, el_hi) = ELEVATION_RANGE_DEG;
        (0..n_views)
            .map(|i| {
                let azimuth = std::f64::consts::TAU * (i as f64 + rng.gen::<f64>()) / n_views as f64;
                let stratum = i % elevation_strata;
                let u = (stratum as f64 + rng.gen::<f64>()) / elevation_strata as f64;
                let elevation = (el_lo + (el_hi - el_lo) * u).to_radians();
                let eye = CAMERA_DISTANCE
                    * Vec3::new(
                        elevation.cos() * azimuth.cos(),
                        elevation.sin(),
                        elevation.cos() * azimuth.sin(),
                    );
                Camera::look_at(eye, Vec3::zeros(), Vec3::y(), focal, resolution, resolution)
            })
            .collect()
    }

    /// Rendered views plus the ground-truth mesh.
    pub fn dataset<R: Rng + ?Sized>(
        &self,
        n_views: usize,
        resolution: u32,
        mesh_options: ExtractOptions,
        rng: &mut R,
    ) -> Result<(SceneDataset, TriMesh)> {
        self.validate()?;
        let views = Self::cameras(n_views, resolution, rng)?
            .into_iter()
            .enumerate()
            .map(|(i, camera)| View {
                name: SceneDataset::image_name(i),
                image: self.render(&camera).quantized(),
                camera,
            })
            .collect();
        let dataset = SceneDataset {
            views,
            scene_bound: self.scene_bound,
        };
        Ok((dataset, self.ground_truth_mesh(mesh_options)?))
    }
}

/// Piecewise-linear occupancy of a [`SynthScene`].
pub struct SceneOccupancy<'a> {
    scene: &'a SynthScene,
    width: f64,
}

impl OccupancyModel for SceneOccupancy<'_> {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64> {
        points
            .iter()
            .map(|p| (0.5 - self.scene.sdf(p) / self.width).clamp(0.0, 1.0))
            .collect()
    }

    fn attributes(&self, points: &[Vec3]) -> PointAttributes {
        let normals = points
            .iter()
            .map(|p| {
                let nearest = self
                    .scene
                    .primitives
                    .iter()
                    .min_by(|a, b| a.sdf(p).total_cmp(&b.sdf(p)))
                    .expect("validated scene");
                -nearest.sdf_normal(p)
            })
            .collect();
        PointAttributes {
            occupancy: self.occupancy(points),
            normals,
            features: Matrix::zeros((points.len(), 0)),
        }
    }
}
