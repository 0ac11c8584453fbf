//! Surface sampling and Chamfer distance.

use rand::Rng;
use rstar::RTree;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::fields::Vec3;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `count` points distributed uniformly by area over the mesh surface.
pub fn sample_points<R: Rng + ?Sized>(mesh: &TriMesh, count: usize, rng: &mut R) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::Domain("cannot sample an empty mesh".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::Domain("mesh has zero surface area".into()));
    }
    let points = (0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect();
    Ok(PointCloud { points })
}

/// Symmetric Chamfer distance with both one-sided means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChamferReport {
    /// Mean distance from each point of `a` to its nearest point of `b`.
    pub a_to_b: f64,
    pub b_to_a: f64,
    /// `(a_to_b + b_to_a) / 2`.
    pub symmetric: f64,
}

fn mean_nearest(from: &[Vec3], to: &[Vec3]) -> f64 {
    let tree = RTree::bulk_load(to.iter().map(|p| [p.x, p.y, p.z]).collect());
    let sum: f64 = from
        .iter()
        .map(|p| {
            let q = tree.nearest_neighbor(&[p.x, p.y, p.z]).expect("non-empty tree");
            (p - Vec3::from(*q)).norm_squared().sqrt()
        })
        .sum();
    sum / from.len() as f64
}

fn check(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Chamfer distance needs two non-empty clouds".into()));
    }
    Ok(())
}

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<ChamferReport> {
    check(a, b)?;
    let a_to_b = mean_nearest(&a.points, &b.points);
    let b_to_a = mean_nearest(&b.points, &a.points);
    Ok(ChamferReport {
        a_to_b,
        b_to_a,
        symmetric: 0.5 * (a_to_b + b_to_a),
    })
}

/// Quadratic-time reference implementation.
pub fn chamfer_brute_force(a: &PointCloud, b: &PointCloud) -> Result<ChamferReport> {
    check(a, b)?;
    let one_sided = |from: &[Vec3], to: &[Vec3]| {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum::<f64>()
            / from.len() as f64
    };
    let a_to_b = one_sided(&a.points, &b.points);
    let b_to_a = one_sided(&b.points, &a.points);
    Ok(ChamferReport {
        a_to_b,
        b_to_a,
        symmetric: 0.5 * (a_to_b + b_to_a),
    })
}
