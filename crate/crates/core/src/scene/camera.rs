//! Pinhole cameras with OpenCV axes: +x right, +y down, +z forward.

use nalgebra::{Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::fields::Vec3;
use crate::render::Ray;

/// Depth at which every camera ray starts.
pub const T_NEAR: f64 = 0.05;

const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Rigid transform taking world points into camera coordinates.
    pub world_to_camera: Matrix4<f64>,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Domain(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Domain("camera has zero pixels".into()));
        }
        let r = self.rotation();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !(err <= ORTHONORMAL_TOLERANCE) || !(r.determinant() > 0.0) {
            return Err(Error::Domain(format!(
                "world_to_camera rotation is not orthonormal (error {err:e})"
            )));
        }
        let last = self.world_to_camera.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::Domain(
                "world_to_camera must have last row 0 0 0 1".into(),
            ));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with `up` pointing up in the image.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, focal: f64, width: u32, height: u32) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Domain("camera eye and target coincide".into()))?;
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = forward.cross(&Vec3::x());
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let cam = Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            world_to_camera: m,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.world_to_camera.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vec3 {
        self.world_to_camera.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation().transpose() * self.translation())
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation().transpose() * Vec3::z()
    }

    /// Unit world direction through continuous pixel coordinates `(u, v)`.
    pub fn direction(&self, u: f64, v: f64) -> Vec3 {
        let cam = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.rotation().transpose() * cam).normalize()
    }

    /// `t_far` for a scene of radius `scene_bound` around the origin.
    pub fn t_far(&self, scene_bound: f64) -> f64 {
        2.0 * scene_bound + self.center().norm()
    }

    /// Ray through the center of pixel `(px, py)`.
    pub fn pixel_ray(&self, px: u32, py: u32, scene_bound: f64) -> Result<Ray> {
        if px >= self.width || py >= self.height {
            return Err(Error::Domain(format!(
                "pixel ({px}, {py}) is outside the {}x{} image",
                self.width, self.height
            )));
        }
        let d = self.direction(px as f64 + 0.5, py as f64 + 0.5);
        Ray::new(self.center(), d, T_NEAR, self.t_far(scene_bound))
    }

    /// Rays for every pixel in row-major order.
    pub fn rays(&self, scene_bound: f64) -> Vec<Ray> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.pixel_ray(x, y, scene_bound).expect("pixel in range"))
            .collect()
    }

    pub fn world_to_camera_row_major(&self) -> [f64; 16] {
        std::array::from_fn(|i| self.world_to_camera[(i / 4, i % 4)])
    }

    pub fn matrix_from_row_major(values: &[f64]) -> Option<Matrix4<f64>> {
        (values.len() == 16).then(|| Matrix4::from_row_slice(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::look_at(Vec3::new(0.3, 0.5, -2.0), Vec3::zeros(), Vec3::y(), 50.0, 64, 48).unwrap()
    }

    #[test]
    fn principal_point_looks_forward() {
        let mut c = cam();
        c.cx = 10.5;
        c.cy = 7.5;
        let r = c.pixel_ray(10, 7, 1.0).unwrap();
        assert!((r.direction - c.forward()).norm() < 1e-12);
        assert!((c.center() - Vec3::new(0.3, 0.5, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn corner_pixel_matches_pinhole_algebra() {
        let c = cam();
        let r = c.pixel_ray(0, 0, 1.0).unwrap();
        let (x, y) = ((0.5 - c.cx) / c.fx, (0.5 - c.cy) / c.fy);
        let norm = (x * x + y * y + 1.0).sqrt();
        let rt = c.rotation().transpose();
        let expected = (rt.column(0) * x + rt.column(1) * y + rt.column(2)) / norm;
        assert!((r.direction - expected).norm() < 1e-12);
    }

    #[test]
    fn image_up_is_world_up() {
        let c = cam();
        let top = c.direction(32.0, 0.0);
        let bottom = c.direction(32.0, 48.0);
        assert!(top.y > bottom.y);
    }

    #[test]
    fn out_of_range_pixel_is_rejected() {
        assert!(cam().pixel_ray(64, 0, 1.0).is_err());
    }

    #[test]
    fn skewed_rotation_is_rejected() {
        let mut c = cam();
        c.world_to_camera[(0, 1)] += 1e-2;
        assert!(c.validate().is_err());
    }
}
