//! Ray batches and the differentiable rendering of them.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use super::config::{TrainConfig, TrainMode};
use super::loss::{perturbations, record_loss_rec, record_loss_reg};
use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::fields::{points_to_matrix, Fields, OccupancyField, Vec3};
use crate::render::{full_ray, plan_samples, Ray, SamplePlan};
use crate::scene::SceneDataset;

/// Everything random about one iteration, fixed before differentiation.
#[derive(Clone, Debug)]
pub struct Batch {
    pub view: usize,
    pub rays: Vec<Ray>,
    pub targets: Vec<[f64; 3]>,
    /// Surface depth per ray from root finding.
    pub depths: Vec<Option<f64>>,
    /// Sample plans for volume rendering; empty in surface mode.
    pub plans: Vec<SamplePlan>,
    /// Surface points used by the regularizer and their perturbations.
    pub reg_points: Vec<Vec3>,
    pub reg_offsets: Vec<Vec3>,
    pub delta: f64,
}

impl Batch {
    /// Draws a view, `m` of its pixels, and their samples at interval
    /// half-width `delta`.
    pub fn sample<R: Rng + ?Sized>(
        fields: &Fields,
        dataset: &SceneDataset,
        config: &TrainConfig,
        delta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dataset.views.is_empty() {
            return Err(Error::Usage("cannot train on an empty dataset".into()));
        }
        let view = rng.gen_range(0..dataset.views.len());
        let v = &dataset.views[view];
        let pixels = v.camera.width as usize * v.camera.height as usize;
        let picks = index::sample(rng, pixels, config.m.min(pixels)).into_vec();
        let mut rays = Vec::with_capacity(picks.len());
        let mut targets = Vec::with_capacity(picks.len());
        for p in picks {
            let (x, y) = ((p % v.camera.width as usize) as u32, (p / v.camera.width as usize) as u32);
            rays.push(v.camera.pixel_ray(x, y, dataset.scene_bound)?);
            targets.push(v.image.get(x, y));
        }
        Self::for_rays(fields, config, rays, targets, view, delta, rng)
    }

    /// Root-finds `rays` and plans their samples.
    pub fn for_rays<R: Rng + ?Sized>(
        fields: &Fields,
        config: &TrainConfig,
        rays: Vec<Ray>,
        targets: Vec<[f64; 3]>,
        view: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let depths = config.root_finder().depths(&rays, &fields.occupancy);
        let plans = match config.mode {
            TrainMode::Unisurf | TrainMode::NoReg => rays
                .iter()
                .zip(&depths)
                .map(|(r, t)| plan_samples(r, *t, delta, config.n, config.n_free, rng))
                .collect(),
            TrainMode::UniformVr => rays
                .iter()
                .map(|r| full_ray(r, config.n + config.n_free, rng))
                .collect(),
            TrainMode::SrOnly => Vec::new(),
        };
        let reg_points: Vec<Vec3> = if config.effective_lambda() > 0.0 {
            rays.iter()
                .zip(&depths)
                .filter_map(|(r, t)| t.filter(|&t| t > r.t_near).map(|t| r.at(t)))
                .collect()
        } else {
            Vec::new()
        };
        let reg_offsets = perturbations(reg_points.len(), config.eps_scale, rng);
        Ok(Self {
            view,
            rays,
            targets,
            depths,
            plans,
            reg_points,
            reg_offsets,
            delta,
        })
    }

    pub fn hits(&self) -> usize {
        self.depths.iter().filter(|d| d.is_some()).count()
    }
}

/// Parameter nodes of both networks on one tape.
pub struct BoundFields {
    pub occupancy: Vec<Var>,
    pub color: Vec<Var>,
}

impl BoundFields {
    pub fn bind(tape: &mut Tape, fields: &Fields) -> Self {
        Self {
            occupancy: fields.occupancy.bind(tape),
            color: fields.color.bind(tape),
        }
    }

    pub fn all(&self) -> Vec<Var> {
        self.occupancy.iter().chain(&self.color).copied().collect()
    }
}

fn directions_matrix(rays: &[Ray], plans: &[SamplePlan]) -> Matrix {
    let dirs: Vec<Vec3> = rays
        .iter()
        .zip(plans)
        .flat_map(|(r, p)| std::iter::repeat(r.direction).take(p.len()))
        .collect();
    points_to_matrix(&dirs)
}

/// `m x 3` volume-rendered colors of the batch.
pub fn record_volume(
    tape: &mut Tape,
    fields: &Fields,
    vars: &BoundFields,
    rays: &[Ray],
    plans: &[SamplePlan],
    background: [f64; 3],
) -> Result<Var> {
    let points: Vec<Vec3> = rays
        .iter()
        .zip(plans)
        .flat_map(|(r, p)| p.depths.iter().map(move |&t| r.at(t)))
        .collect();
    let mut offsets = Vec::with_capacity(plans.len() + 1);
    offsets.push(0);
    for p in plans {
        offsets.push(offsets.last().unwrap() + p.len());
    }
    let offsets: Arc<[usize]> = offsets.into();

    let x = tape.leaf(points_to_matrix(&points));
    let d = tape.leaf(directions_matrix(rays, plans));
    let nodes = fields.occupancy.record(tape, &vars.occupancy, x)?;
    let normals = OccupancyField::record_normals(tape, &nodes, x)?;
    let colors = fields.color.record(tape, &vars.color, x, normals, nodes.feature, d)?;
    let weights = tape.composite_weights(nodes.occupancy, offsets.clone());
    let weighted = tape.mul_col(colors, weights);
    let rgb = tape.segment_sum(weighted, offsets.clone());
    if background == [0.0; 3] {
        return Ok(rgb);
    }
    let opacity = tape.segment_sum(weights, offsets);
    let unclaimed = tape.affine(opacity, -1.0, 1.0);
    let bg = tape.leaf(Matrix::from_shape_vec((1, 3), background.to_vec()).expect("row"));
    let bg_term = tape.matmul(unclaimed, bg);
    Ok(tape.add(rgb, bg_term))
}

/// Colors at the root-found surface points of the hit rays, with the
/// surface point moving with the occupancy parameters to first order.
///
/// Returns the `h x 3` colors and the indices of the hit rays.
pub fn record_surface(
    tape: &mut Tape,
    fields: &Fields,
    vars: &BoundFields,
    rays: &[Ray],
    depths: &[Option<f64>],
) -> Result<(Var, Vec<usize>)> {
    let hits: Vec<usize> = (0..rays.len()).filter(|&i| depths[i].is_some()).collect();
    let x0: Vec<Vec3> = hits.iter().map(|&i| rays[i].at(depths[i].unwrap())).collect();
    let dirs: Vec<Vec3> = hits.iter().map(|&i| rays[i].direction).collect();
    let x0v = tape.leaf(points_to_matrix(&x0));
    let dv = tape.leaf(points_to_matrix(&dirs));

    // t(theta) = t0 - (o(x0) - 0.5) / (grad o . d), denominator held fixed.
    let nodes0 = fields.occupancy.record(tape, &vars.occupancy, x0v)?;
    let grad = OccupancyField::input_gradient(tape, &nodes0, x0v)?;
    let inv_slope: Vec<f64> = tape
        .value(grad)
        .rows()
        .into_iter()
        .zip(&dirs)
        .map(|(g, d)| {
            let s = g[0] * d.x + g[1] * d.y + g[2] * d.z;
            if s.abs() > 1e-6 {
                -1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    let scale = tape.leaf(Matrix::from_shape_vec((hits.len(), 1), inv_slope).expect("column"));
    let residual = tape.affine(nodes0.occupancy, 1.0, -0.5);
    let dt = tape.mul(residual, scale);
    let step = tape.mul_col(dv, dt);
    let x = tape.add(x0v, step);

    let nodes = fields.occupancy.record(tape, &vars.occupancy, x)?;
    let normals = OccupancyField::record_normals(tape, &nodes, x)?;
    let colors = fields.color.record(tape, &vars.color, x, normals, nodes.feature, dv)?;
    Ok((colors, hits))
}

/// Scalar nodes of one loss evaluation.
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub total: Var,
    pub rec: Var,
    pub reg: Var,
}

/// Records `L_rec + lambda * L_reg` for the batch.
pub fn record_total_loss(
    tape: &mut Tape,
    fields: &Fields,
    vars: &BoundFields,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<LossNodes> {
    let rec = if config.mode == TrainMode::SrOnly {
        let (colors, hits) = record_surface(tape, fields, vars, &batch.rays, &batch.depths)?;
        let hit_targets: Vec<[f64; 3]> = hits.iter().map(|&i| batch.targets[i]).collect();
        let hit_loss = record_loss_rec(tape, colors, &hit_targets)?;
        let miss_loss: f64 = (0..batch.rays.len())
            .filter(|i| batch.depths[*i].is_none())
            .map(|i| {
                (0..3)
                    .map(|k| (config.background[k] - batch.targets[i][k]).abs())
                    .sum::<f64>()
            })
            .sum();
        let miss = tape.scalar_leaf(miss_loss);
        tape.add(hit_loss, miss)
    } else {
        let rgb = record_volume(tape, fields, vars, &batch.rays, &batch.plans, config.background)?;
        record_loss_rec(tape, rgb, &batch.targets)?
    };
    let lambda = config.effective_lambda();
    let reg = if lambda > 0.0 {
        record_loss_reg(tape, &fields.occupancy, &vars.occupancy, &batch.reg_points, &batch.reg_offsets)?
    } else {
        tape.scalar_leaf(0.0)
    };
    let weighted = tape.scale(reg, lambda);
    let total = tape.add(rec, weighted);
    Ok(LossNodes { total, rec, reg })
}

/// Loss values and parameter gradients (occupancy first, then color).
pub struct Evaluation {
    pub total: f64,
    pub rec: f64,
    pub reg: f64,
    pub grads: Vec<Matrix>,
}

pub fn evaluate(fields: &Fields, batch: &Batch, config: &TrainConfig) -> Result<Evaluation> {
    let mut tape = Tape::new();
    let vars = BoundFields::bind(&mut tape, fields);
    let loss = record_total_loss(&mut tape, fields, &vars, batch, config)?;
    let (total, rec, reg) = (tape.scalar(loss.total), tape.scalar(loss.rec), tape.scalar(loss.reg));
    let grads = tape.backward(loss.total, &vars.all())?;
    Ok(Evaluation {
        total,
        rec,
        reg,
        grads,
    })
}

/// Loss value only, for finite-difference checks.
pub fn evaluate_loss(fields: &Fields, batch: &Batch, config: &TrainConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = BoundFields::bind(&mut tape, fields);
    let loss = record_total_loss(&mut tape, fields, &vars, batch, config)?;
    Ok(tape.scalar(loss.total))
}
