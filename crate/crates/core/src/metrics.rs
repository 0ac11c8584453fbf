//! Geometry quality measures that work directly on an occupancy field.

use crate::error::{Error, Result};
use crate::fields::{unit_or_zero, OccupancyModel, Vec3};
use crate::render::{Ray, RootFinder};

/// Regular grid of parallel probe rays.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeGrid {
    /// Ray origin of cell `(0, 0)`.
    pub origin: Vec3,
    /// Offset between neighbouring cells along the two grid axes.
    pub step_u: Vec3,
    pub step_v: Vec3,
    pub cells_u: usize,
    pub cells_v: usize,
    /// Unit ray direction.
    pub direction: Vec3,
    /// Ray length.
    pub length: f64,
}

/// Mean `|n_a - n_b|` over 4-neighbour pairs of probe cells, where `n` is the
/// unit normal at the first surface crossing of the cell's ray.
///
/// Only cells accepted by `keep` (given the crossing point) take part.
/// Returns the mean and the number of pairs.
pub fn normal_variation<O, F>(occ: &O, finder: &RootFinder, grid: &ProbeGrid, keep: F) -> Result<(f64, usize)>
where
    O: OccupancyModel + ?Sized,
    F: Fn(&Vec3) -> bool,
{
    let mut rays = Vec::with_capacity(grid.cells_u * grid.cells_v);
    for v in 0..grid.cells_v {
        for u in 0..grid.cells_u {
            let o = grid.origin + grid.step_u * u as f64 + grid.step_v * v as f64;
            rays.push(Ray::new(o, grid.direction, 0.0, grid.length)?);
        }
    }
    let depths = finder.depths(&rays, occ);
    let hits: Vec<Vec3> = rays
        .iter()
        .zip(&depths)
        .filter_map(|(r, t)| t.map(|t| r.at(t)))
        .collect();
    let normals = occ.attributes(&hits).normals;
    let mut cell = vec![None; rays.len()];
    let mut it = hits.iter().zip(normals);
    for (i, t) in depths.iter().enumerate() {
        if t.is_some() {
            let (p, n) = it.next().expect("one normal per hit");
            if keep(p) && n.norm() > 0.0 {
                cell[i] = Some(unit_or_zero(n));
            }
        }
    }
    let at = |u: usize, v: usize| cell[v * grid.cells_u + u];
    let (mut sum, mut pairs) = (0.0, 0);
    for v in 0..grid.cells_v {
        for u in 0..grid.cells_u {
            let Some(a) = at(u, v) else { continue };
            for b in [(u + 1 < grid.cells_u).then(|| at(u + 1, v)), (v + 1 < grid.cells_v).then(|| at(u, v + 1))]
                .into_iter()
                .flatten()
                .flatten()
            {
                sum += (a - b).norm();
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Domain("no neighbouring probes reached the surface".into()));
    }
    Ok((sum / pairs as f64, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::analytic::{HalfSpaceField, SphereField};

    fn downward(half: f64, cells: usize) -> ProbeGrid {
        let step = 2.0 * half / (cells - 1) as f64;
        ProbeGrid {
            origin: Vec3::new(-half, 1.0, -half),
            step_u: Vec3::new(step, 0.0, 0.0),
            step_v: Vec3::new(0.0, 0.0, step),
            cells_u: cells,
            cells_v: cells,
            direction: -Vec3::y(),
            length: 2.0,
        }
    }

    #[test]
    fn plane_has_no_variation() {
        let plane = HalfSpaceField {
            point: Vec3::zeros(),
            normal: -Vec3::y(),
            sharpness: 50.0,
        };
        let (m, pairs) = normal_variation(&plane, &RootFinder::default(), &downward(0.5, 11), |_| true).unwrap();
        assert!(m < 1e-9, "{m}");
        assert_eq!(pairs, 2 * 10 * 11);
    }

    #[test]
    fn sphere_variation_matches_the_angle_between_cells() {
        let s = SphereField::new(0.8, 50.0);
        let grid = downward(0.05, 3);
        let (m, _) = normal_variation(&s, &RootFinder::default(), &grid, |_| true).unwrap();
        assert!(m > 0.05 && m < 0.08, "{m}");
    }

    #[test]
    fn empty_field_is_an_error() {
        let e = crate::fields::analytic::EmptyField;
        assert!(normal_variation(&e, &RootFinder::default(), &downward(0.5, 4), |_| true).is_err());
    }
}
