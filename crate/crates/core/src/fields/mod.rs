//! The occupancy field, the color field and the traits the renderer consumes.

pub mod analytic;
pub(crate) mod neural;

pub use neural::{normalize_rows, ColorField, FieldConfig, Fields, OccupancyField, OccupancyNodes};

use nalgebra::Vector3;

use crate::autodiff::Matrix;

pub type Vec3 = Vector3<f64>;

/// First visible crossing of the 0.5 level set along a ray.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec3,
    /// Unit occupancy gradient direction (points into the object).
    pub normal: Vec3,
    pub feature: Vec<f64>,
    /// Ray depth in scene units.
    pub depth: f64,
}

/// Occupancy, unit normals and geometry features at a batch of points.
#[derive(Clone, Debug)]
pub struct PointAttributes {
    pub occupancy: Vec<f64>,
    /// Zero where the occupancy gradient vanishes.
    pub normals: Vec<Vec3>,
    /// One row per point; may have zero columns.
    pub features: Matrix,
}

/// Anything that assigns an occupancy probability to points in space.
pub trait OccupancyModel: Sync {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64>;

    fn attributes(&self, points: &[Vec3]) -> PointAttributes;
}

/// View-dependent surface color conditioned on normals and features.
pub trait ColorModel: Sync {
    fn colors(
        &self,
        points: &[Vec3],
        normals: &[Vec3],
        features: &Matrix,
        directions: &[Vec3],
    ) -> Vec<[f64; 3]>;
}

pub(crate) fn points_to_matrix(points: &[Vec3]) -> Matrix {
    Matrix::from_shape_fn((points.len(), 3), |(r, c)| points[r][c])
}

pub(crate) fn unit_or_zero(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vec3::zeros()
    }
}
