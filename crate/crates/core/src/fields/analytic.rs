//! Closed-form occupancy and color fields used as test fixtures and oracles.

use super::{ColorModel, OccupancyModel, PointAttributes, Vec3};
use crate::autodiff::unary::sigmoid;
use crate::autodiff::Matrix;

fn no_features(n: usize) -> Matrix {
    Matrix::zeros((n, 0))
}

/// `sigmoid(sharpness * (radius - |x - center|))`.
#[derive(Clone, Copy, Debug)]
pub struct SphereField {
    pub center: Vec3,
    pub radius: f64,
    pub sharpness: f64,
}

impl SphereField {
    pub fn new(radius: f64, sharpness: f64) -> Self {
        Self {
            center: Vec3::zeros(),
            radius,
            sharpness,
        }
    }

    fn value(&self, p: &Vec3) -> f64 {
        sigmoid(self.sharpness * (self.radius - (p - self.center).norm()))
    }
}

impl OccupancyModel for SphereField {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64> {
        points.iter().map(|p| self.value(p)).collect()
    }

    fn attributes(&self, points: &[Vec3]) -> PointAttributes {
        PointAttributes {
            occupancy: self.occupancy(points),
            normals: points
                .iter()
                .map(|p| super::unit_or_zero(self.center - p))
                .collect(),
            features: no_features(points.len()),
        }
    }
}

/// Half space below a plane: `sigmoid(sharpness * (point - x) . normal)`.
#[derive(Clone, Copy, Debug)]
pub struct HalfSpaceField {
    pub point: Vec3,
    /// Unit normal pointing out of the occupied side.
    pub normal: Vec3,
    pub sharpness: f64,
}

impl OccupancyModel for HalfSpaceField {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64> {
        points
            .iter()
            .map(|p| sigmoid(self.sharpness * (self.point - p).dot(&self.normal)))
            .collect()
    }

    fn attributes(&self, points: &[Vec3]) -> PointAttributes {
        PointAttributes {
            occupancy: self.occupancy(points),
            normals: vec![-self.normal; points.len()],
            features: no_features(points.len()),
        }
    }
}

/// `clamp(offset + gradient . x, 0, 1)`.
#[derive(Clone, Copy, Debug)]
pub struct LinearField {
    pub gradient: Vec3,
    pub offset: f64,
}

impl OccupancyModel for LinearField {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64> {
        points
            .iter()
            .map(|p| (self.offset + self.gradient.dot(p)).clamp(0.0, 1.0))
            .collect()
    }

    fn attributes(&self, points: &[Vec3]) -> PointAttributes {
        PointAttributes {
            occupancy: self.occupancy(points),
            normals: vec![super::unit_or_zero(self.gradient); points.len()],
            features: no_features(points.len()),
        }
    }
}

/// Occupancy 0 everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmptyField;

impl OccupancyModel for EmptyField {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64> {
        vec![0.0; points.len()]
    }

    fn attributes(&self, points: &[Vec3]) -> PointAttributes {
        PointAttributes {
            occupancy: self.occupancy(points),
            normals: vec![Vec3::zeros(); points.len()],
            features: no_features(points.len()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantColor(pub [f64; 3]);

impl ColorModel for ConstantColor {
    fn colors(&self, points: &[Vec3], _: &[Vec3], _: &Matrix, _: &[Vec3]) -> Vec<[f64; 3]> {
        vec![self.0; points.len()]
    }
}

/// Smooth position-dependent color `0.5 + 0.4 sin(frequency * x_c + phase_c)`.
#[derive(Clone, Copy, Debug)]
pub struct SmoothColor {
    pub frequency: f64,
}

impl SmoothColor {
    pub fn at(&self, p: &Vec3) -> [f64; 3] {
        let f = self.frequency;
        [
            0.5 + 0.4 * (f * p.x).sin(),
            0.5 + 0.4 * (f * p.y + 1.0).sin(),
            0.5 + 0.4 * (f * p.z + 2.0).sin(),
        ]
    }
}

impl ColorModel for SmoothColor {
    fn colors(&self, points: &[Vec3], _: &[Vec3], _: &Matrix, _: &[Vec3]) -> Vec<[f64; 3]> {
        points.iter().map(|p| self.at(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_normals_point_to_the_center() {
        let s = SphereField::new(0.5, 50.0);
        let a = s.attributes(&[Vec3::new(0.0, 0.3, 0.4)]);
        assert!((a.normals[0] - Vec3::new(0.0, -0.6, -0.8)).norm() < 1e-12);
        assert!(a.occupancy[0] == 0.5);
    }

    #[test]
    fn half_space_is_occupied_below() {
        let h = HalfSpaceField {
            point: Vec3::zeros(),
            normal: Vec3::y(),
            sharpness: 20.0,
        };
        let o = h.occupancy(&[Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]);
        assert!(o[0] > 0.99 && o[1] < 0.01);
    }
}
