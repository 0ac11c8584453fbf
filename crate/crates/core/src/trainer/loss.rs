//! Photometric loss and the normal-smoothness regularizer.

use rand::Rng;

use crate::autodiff::{Matrix, Tape, UnaryFn, Var};
use crate::error::{Error, Result};
use crate::fields::neural::NORM_FLOOR;
use crate::fields::{normalize_rows, points_to_matrix, OccupancyField, OccupancyModel, Vec3};

/// `sum_r |predicted_r - observed_r|_1`.
pub fn loss_rec(predicted: &[[f64; 3]], observed: &[[f64; 3]]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (0..3).map(|k| (p[k] - o[k]).abs()).sum::<f64>())
        .sum())
}

/// Tape version of [`loss_rec`] for an `m x 3` prediction.
pub fn record_loss_rec(tape: &mut Tape, predicted: Var, observed: &[[f64; 3]]) -> Result<Var> {
    if tape.shape(predicted) != (observed.len(), 3) {
        return Err(Error::Usage(format!(
            "prediction shape {:?} does not match {} observations",
            tape.shape(predicted),
            observed.len()
        )));
    }
    let target = tape.leaf(Matrix::from_shape_fn((observed.len(), 3), |(r, c)| observed[r][c]));
    let diff = tape.sub(predicted, target);
    let abs = tape.unary(diff, UnaryFn::Abs);
    Ok(tape.sum_all(abs))
}

/// Uniform offsets in `[-eps_scale, eps_scale]^3`.
pub fn perturbations<R: Rng + ?Sized>(count: usize, eps_scale: f64, rng: &mut R) -> Vec<Vec3> {
    (0..count)
        .map(|_| Vec3::from_fn(|_, _| eps_scale * (2.0 * rng.gen::<f64>() - 1.0)))
        .collect()
}

/// `sum_s |n(x_s) - n(x_s + eps_s)|_2` over points whose normals are defined.
pub fn loss_reg<M: OccupancyModel + ?Sized>(model: &M, points: &[Vec3], offsets: &[Vec3]) -> f64 {
    let moved: Vec<Vec3> = points.iter().zip(offsets).map(|(p, e)| p + e).collect();
    let a = model.attributes(points).normals;
    let b = model.attributes(&moved).normals;
    a.iter()
        .zip(&b)
        .filter(|(n1, n2)| n1.norm() > 0.0 && n2.norm() > 0.0)
        .map(|(n1, n2)| (n1 - n2).norm())
        .sum()
}

/// Differentiable regularizer on the neural occupancy field.
///
/// Points where either logit gradient is below `1e-12` are skipped.
pub fn record_loss_reg(
    tape: &mut Tape,
    field: &OccupancyField,
    vars: &[Var],
    points: &[Vec3],
    offsets: &[Vec3],
) -> Result<Var> {
    if points.len() != offsets.len() {
        return Err(Error::Usage("one offset per regularizer point is required".into()));
    }
    if points.is_empty() {
        return Ok(tape.scalar_leaf(0.0));
    }
    let moved: Vec<Vec3> = points.iter().zip(offsets).map(|(p, e)| p + e).collect();
    let mut normals = Vec::with_capacity(2);
    let mut keep = vec![1.0; points.len()];
    for set in [points, &moved[..]] {
        let x = tape.leaf(points_to_matrix(set));
        let nodes = field.record(tape, vars, x)?;
        let g = OccupancyField::record_logit_gradient(tape, &nodes, x)?;
        for (k, row) in keep.iter_mut().zip(tape.value(g).rows()) {
            if !(row.dot(&row).sqrt() >= NORM_FLOOR) {
                *k = 0.0;
            }
        }
        normals.push(normalize_rows(tape, g));
    }
    let diff = tape.sub(normals[0], normals[1]);
    let sq = tape.mul(diff, diff);
    let sum = tape.sum_cols(sq);
    let dist = tape.unary(sum, UnaryFn::Sqrt);
    let mask = tape.leaf(Matrix::from_shape_vec((keep.len(), 1), keep).expect("column"));
    let kept = tape.mul(dist, mask);
    Ok(tape.sum_all(kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::analytic::{HalfSpaceField, SphereField};
    use crate::rng;

    #[test]
    fn identical_colors_cost_nothing() {
        assert_eq!(loss_rec(&[[0.1, 0.2, 0.3]], &[[0.1, 0.2, 0.3]]).unwrap(), 0.0);
    }

    #[test]
    fn l1_sums_channels() {
        let l = loss_rec(&[[0.6, 0.6, 0.6]], &[[0.5, 0.5, 0.5]]).unwrap();
        assert!((l - 0.3).abs() < 1e-12);
        let l2 = loss_rec(&[[0.7, 0.7, 0.7]], &[[0.5, 0.5, 0.5]]).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-12);
        assert!(loss_rec(&[[0.0; 3]], &[]).is_err());
    }

    #[test]
    fn tape_loss_matches_direct_loss() {
        let mut tape = Tape::new();
        let p = tape.leaf(ndarray::array![[0.2, 0.4, 0.9], [0.0, 1.0, 0.5]]);
        let obs = [[0.1, 0.5, 0.9], [0.3, 0.3, 0.3]];
        let l = record_loss_rec(&mut tape, p, &obs).unwrap();
        let direct = loss_rec(&[[0.2, 0.4, 0.9], [0.0, 1.0, 0.5]], &obs).unwrap();
        assert!((tape.scalar(l) - direct).abs() < 1e-15);
    }

    #[test]
    fn zero_offset_gives_zero() {
        let s = SphereField::new(0.5, 20.0);
        let pts = [Vec3::new(0.5, 0.0, 0.0)];
        assert_eq!(loss_reg(&s, &pts, &[Vec3::zeros()]), 0.0);
    }

    #[test]
    fn planar_field_has_no_variation() {
        let h = HalfSpaceField {
            point: Vec3::zeros(),
            normal: Vec3::x(),
            sharpness: 1.0,
        };
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.0, i as f64 * 0.1, 0.0)).collect();
        let eps = perturbations(10, 0.01, &mut rng::stream(0, 0));
        assert_eq!(loss_reg(&h, &pts, &eps), 0.0);
    }

    #[test]
    fn sphere_matches_the_radial_angle() {
        let s = SphereField::new(0.5, 20.0);
        let p = Vec3::new(0.3, 0.4, 0.0);
        let eps = perturbations(1, 0.01, &mut rng::stream(1, 0));
        let q = p + eps[0];
        let angle = p.angle(&q);
        let expected = 2.0 * (angle / 2.0).sin();
        assert!((loss_reg(&s, &[p], &eps) - expected).abs() < 1e-12);
    }
}
