//! Isosurface extraction, mesh files and geometric evaluation.

mod cases;
mod eval;
mod extract;

pub use eval::{chamfer, chamfer_brute_force, sample_points, ChamferReport, PointCloud};
pub use extract::{extract_mesh, Bounds, ExtractOptions};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::Vec3;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Volume enclosed by a closed mesh; positive when normals face outward.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    /// Merges vertices with identical coordinates and removes triangles
    /// with repeated vertices or zero area.
    pub fn drop_degenerate(&mut self) {
        let mut first: HashMap<[u64; 3], u32> = HashMap::new();
        let mut remap = Vec::with_capacity(self.vertices.len());
        let mut kept = Vec::new();
        for v in &self.vertices {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            let id = *first.entry(key).or_insert_with(|| {
                kept.push(*v);
                (kept.len() - 1) as u32
            });
            remap.push(id);
        }
        self.vertices = kept;
        let tris = std::mem::take(&mut self.triangles);
        self.triangles = tris
            .into_iter()
            .map(|t| t.map(|i| remap[i as usize]))
            .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
            .collect();
        let areas: Vec<bool> = (0..self.triangles.len()).map(|t| self.triangle_area(t) > 0.0).collect();
        let mut it = areas.into_iter();
        self.triangles.retain(|_| it.next().unwrap_or(true));
        self.drop_unused_vertices();
    }

    fn drop_unused_vertices(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                if remap[*i as usize] == u32::MAX {
                    remap[*i as usize] = kept.len() as u32;
                    kept.push(self.vertices[*i as usize]);
                }
                *i = remap[*i as usize];
            }
        }
        self.vertices = kept;
    }

    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        s.push_str("property float x\nproperty float y\nproperty float z\n");
        let _ = writeln!(s, "element face {}", self.triangles.len());
        s.push_str("property list uchar int vertex_indices\nend_header\n");
        for v in &self.vertices {
            let _ = writeln!(s, "{:.6} {:.6} {:.6}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    /// Parses an ASCII PLY with `x y z` leading vertex properties and
    /// triangle faces.
    pub fn from_ply(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("ply") {
            return Err("missing ply magic".into());
        }
        let (mut n_vertices, mut n_faces) = (None, None);
        let mut in_vertex = false;
        let mut vertex_props = 0usize;
        for line in lines.by_ref() {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["format", fmt, ..] if *fmt != "ascii" => return Err(format!("unsupported format {fmt}")),
                ["element", "vertex", n] => {
                    n_vertices = Some(n.parse::<usize>().map_err(|e| e.to_string())?);
                    in_vertex = true;
                }
                ["element", "face", n] => {
                    n_faces = Some(n.parse::<usize>().map_err(|e| e.to_string())?);
                    in_vertex = false;
                }
                ["element", ..] => in_vertex = false,
                ["property", ..] if in_vertex => vertex_props += 1,
                ["end_header"] => break,
                _ => {}
            }
        }
        let n_vertices = n_vertices.ok_or("missing vertex element")?;
        let n_faces = n_faces.unwrap_or(0);
        if vertex_props < 3 {
            return Err("vertices need x, y and z".into());
        }
        let mut mesh = TriMesh::default();
        for _ in 0..n_vertices {
            let line = lines.next().ok_or("truncated vertex list")?;
            let v: Vec<f64> = line
                .split_whitespace()
                .take(3)
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("bad vertex: {e}"))?;
            if v.len() != 3 {
                return Err(format!("bad vertex line {line:?}"));
            }
            mesh.vertices.push(Vec3::new(v[0], v[1], v[2]));
        }
        for _ in 0..n_faces {
            let line = lines.next().ok_or("truncated face list")?;
            let f: Vec<u32> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("bad face: {e}"))?;
            if f.first() != Some(&3) || f.len() != 4 {
                return Err(format!("only triangles are supported, got {line:?}"));
            }
            mesh.triangles.push([f[1], f[2], f[3]]);
        }
        mesh.check_indices()?;
        Ok(mesh)
    }

    /// Parses `v` and triangular `f` records of an OBJ file.
    pub fn from_obj(text: &str) -> std::result::Result<Self, String> {
        let mut mesh = TriMesh::default();
        for line in text.lines() {
            let mut words = line.split_whitespace();
            match words.next() {
                Some("v") => {
                    let v: Vec<f64> = words
                        .take(3)
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| format!("bad vertex: {e}"))?;
                    if v.len() != 3 {
                        return Err(format!("bad vertex line {line:?}"));
                    }
                    mesh.vertices.push(Vec3::new(v[0], v[1], v[2]));
                }
                Some("f") => {
                    let f: Vec<u32> = words
                        .map(|w| w.split('/').next().unwrap_or("").parse::<u32>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| format!("bad face: {e}"))?;
                    if f.len() != 3 || f.contains(&0) {
                        return Err(format!("only 1-based triangles are supported, got {line:?}"));
                    }
                    mesh.triangles.push([f[0] - 1, f[1] - 1, f[2] - 1]);
                }
                _ => {}
            }
        }
        mesh.check_indices()?;
        Ok(mesh)
    }

    fn check_indices(&self) -> std::result::Result<(), String> {
        let n = self.vertices.len() as u32;
        if self.triangles.iter().flatten().any(|&i| i >= n) {
            return Err("face index out of range".into());
        }
        Ok(())
    }

    /// Writes PLY or OBJ depending on the extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = match extension(path).as_deref() {
            Some("ply") => self.to_ply(),
            Some("obj") => self.to_obj(),
            _ => return Err(Error::data(path, "mesh files must end in .ply or .obj")),
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match extension(path).as_deref() {
            Some("ply") => Self::from_ply(&text),
            Some("obj") => Self::from_obj(&text),
            _ => Err("mesh files must end in .ply or .obj".into()),
        }
        .map_err(|m| Error::data(path, m))
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}
