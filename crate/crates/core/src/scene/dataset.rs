//! Posed image datasets stored as `cameras.json` plus PNG files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Camera, Image};
use crate::error::{Error, Result};

pub const CAMERAS_FILE: &str = "cameras.json";

#[derive(Clone, Debug, PartialEq)]
pub struct View {
    /// Image path relative to the dataset directory.
    pub name: String,
    pub image: Image,
    pub camera: Camera,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneDataset {
    pub views: Vec<View>,
    /// Radius of the region of interest around the origin.
    pub scene_bound: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CamerasFile {
    views: Vec<ViewEntry>,
    scene_bound: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewEntry {
    image: String,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    world_to_camera: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
}

impl SceneDataset {
    /// Reads `dir/cameras.json` and every image it lists.
    pub fn load(dir: &Path) -> Result<Self> {
        Self::read(&dir.join(CAMERAS_FILE), Some(dir))
    }

    /// Reads a cameras file without its images, which are left black. Every
    /// view must then state its `width` and `height`.
    pub fn load_cameras(path: &Path) -> Result<Self> {
        Self::read(path, None)
    }

    fn read(index: &Path, image_dir: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(index).map_err(|e| Error::io(index, e))?;
        let file: CamerasFile =
            serde_json::from_str(&text).map_err(|e| Error::data(index, e.to_string()))?;
        if !(file.scene_bound > 0.0) {
            return Err(Error::data(index, "scene_bound must be positive"));
        }
        let mut views = Vec::with_capacity(file.views.len());
        for (i, entry) in file.views.into_iter().enumerate() {
            let at = |m: String| Error::data(index, format!("view {i}: {m}"));
            let image = match (image_dir, entry.width, entry.height) {
                (Some(dir), _, _) => Image::load_png(&dir.join(&entry.image))?,
                (None, Some(w), Some(h)) => Image::black(w, h),
                (None, _, _) => return Err(at("width and height are required without images".into())),
            };
            if entry.width.is_some_and(|w| w != image.width)
                || entry.height.is_some_and(|h| h != image.height)
            {
                return Err(at(format!(
                    "image {} is {}x{} but the camera expects {}x{}",
                    entry.image,
                    image.width,
                    image.height,
                    entry.width.unwrap_or(image.width),
                    entry.height.unwrap_or(image.height)
                )));
            }
            let world_to_camera = Camera::matrix_from_row_major(&entry.world_to_camera)
                .ok_or_else(|| at("world_to_camera must have 16 entries".into()))?;
            let camera = Camera {
                fx: entry.fx,
                fy: entry.fy,
                cx: entry.cx,
                cy: entry.cy,
                world_to_camera,
                width: image.width,
                height: image.height,
            };
            camera.validate().map_err(|e| at(e.to_string()))?;
            views.push(View {
                name: entry.image,
                image,
                camera,
            });
        }
        if views.is_empty() {
            return Err(Error::data(index, "dataset has no views"));
        }
        Ok(Self {
            views,
            scene_bound: file.scene_bound,
        })
    }

    /// Writes `cameras.json` and PNG images below `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut entries = Vec::with_capacity(self.views.len());
        for view in &self.views {
            let path: PathBuf = dir.join(&view.name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            view.image.save_png(&path)?;
            let c = &view.camera;
            entries.push(ViewEntry {
                image: view.name.clone(),
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                world_to_camera: c.world_to_camera_row_major().to_vec(),
                width: Some(c.width),
                height: Some(c.height),
            });
        }
        let file = CamerasFile {
            views: entries,
            scene_bound: self.scene_bound,
        };
        let index = dir.join(CAMERAS_FILE);
        let text = serde_json::to_string_pretty(&file).expect("serializable");
        std::fs::write(&index, text + "\n").map_err(|e| Error::io(&index, e))
    }

    /// Conventional image name for view `i`.
    pub fn image_name(i: usize) -> String {
        format!("images/{i:03}.png")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Vec3;

    fn fixture() -> SceneDataset {
        let views = (0..3)
            .map(|i| {
                let eye = Vec3::new(2.0 * (i as f64).cos(), 0.3, 2.0 * (i as f64).sin());
                let camera = Camera::look_at(eye, Vec3::zeros(), Vec3::y(), 7.1, 8, 6).unwrap();
                let pixels = (0..48).map(|p| [p as f64 / 47.0, 0.2, 0.9]).collect();
                View {
                    name: SceneDataset::image_name(i),
                    image: Image::new(8, 6, pixels).unwrap().quantized(),
                    camera,
                }
            })
            .collect();
        SceneDataset {
            views,
            scene_bound: 1.0,
        }
    }

    #[test]
    fn round_trip_is_field_identical() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture();
        data.save(dir.path()).unwrap();
        let back = SceneDataset::load(dir.path()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn missing_index_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = SceneDataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains(CAMERAS_FILE));
    }

    #[test]
    fn skewed_rotation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = fixture();
        data.views[1].camera.world_to_camera[(0, 0)] += 1e-2;
        data.save(dir.path()).unwrap();
        let err = SceneDataset::load(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
        assert!(err.to_string().contains("view 1"));
    }
}
