use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{points_to_matrix, ColorModel, OccupancyModel, PointAttributes, Vec3};
use crate::autodiff::{
    encoded_width, fourier_encode_var, Activation, Matrix, Mlp, MlpSpec, OutputActivation, Param,
    Tape, UnaryFn, Var,
};
use crate::error::{Error, Result};

const EVAL_CHUNK: usize = 8192;
pub(crate) const NORM_FLOOR: f64 = 1e-12;
const IDENTITY_NOISE: f64 = 0.003;
const CALIBRATION_PROBES: usize = 256;

/// `n` nearly uniform unit vectors on a Fibonacci spiral.
fn spread_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

/// Architecture and initialization of both networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Hidden layers of the occupancy network.
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub position_octaves: usize,
    pub direction_octaves: usize,
    pub color_hidden_layers: usize,
    pub color_width: usize,
    pub softplus_beta: f64,
    /// Radius of the initial spherical decision boundary.
    pub init_radius: f64,
    /// Logit slope across the initial boundary, in 1/scene units.
    pub init_sharpness: f64,
}

impl FieldConfig {
    /// Reduced model used for single-machine experiments.
    pub fn desk() -> Self {
        Self {
            hidden_layers: 4,
            hidden_width: 64,
            position_octaves: 4,
            direction_octaves: 4,
            color_hidden_layers: 4,
            color_width: 64,
            softplus_beta: 100.0,
            init_radius: 0.6,
            init_sharpness: 10.0,
        }
    }

    /// Eight 256-wide layers, six position octaves.
    pub fn full() -> Self {
        Self {
            hidden_layers: 8,
            hidden_width: 256,
            position_octaves: 6,
            direction_octaves: 4,
            color_hidden_layers: 4,
            color_width: 256,
            ..Self::desk()
        }
    }

    /// Smallest useful model, for tests and smoke runs.
    pub fn tiny() -> Self {
        Self {
            hidden_layers: 2,
            hidden_width: 16,
            position_octaves: 2,
            direction_octaves: 2,
            color_hidden_layers: 1,
            color_width: 16,
            ..Self::desk()
        }
    }

    pub fn occupancy_spec(&self) -> MlpSpec {
        let mut layer_widths = vec![encoded_width(3, self.position_octaves)];
        layer_widths.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        layer_widths.push(1);
        let skip_layers = if self.hidden_layers >= 4 {
            vec![self.hidden_layers / 2]
        } else {
            vec![]
        };
        MlpSpec {
            layer_widths,
            activation: Activation::Softplus {
                beta: self.softplus_beta,
            },
            skip_layers,
            output_activation: OutputActivation::Sigmoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.color_hidden_layers == 0 {
            return Err(Error::Config("both networks need at least one hidden layer".into()));
        }
        self.occupancy_spec().validate()?;
        self.color_spec().validate()?;
        if !(self.init_radius > 0.0 && self.init_sharpness > 0.0) {
            return Err(Error::Config(
                "init_radius and init_sharpness must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn color_spec(&self) -> MlpSpec {
        let input = encoded_width(3, self.position_octaves)
            + 3
            + self.hidden_width
            + encoded_width(3, self.direction_octaves);
        let mut layer_widths = vec![input];
        layer_widths.extend(std::iter::repeat(self.color_width).take(self.color_hidden_layers));
        layer_widths.push(3);
        MlpSpec {
            layer_widths,
            activation: Activation::Relu,
            skip_layers: vec![],
            output_activation: OutputActivation::Sigmoid,
        }
    }
}

/// Occupancy network `x -> [0, 1]` with its last hidden layer as feature.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyField {
    pub mlp: Mlp,
    pub position_octaves: usize,
}

/// Tape nodes of one occupancy evaluation.
#[derive(Clone, Copy, Debug)]
pub struct OccupancyNodes {
    pub logit: Var,
    pub occupancy: Var,
    pub feature: Var,
}

impl OccupancyField {
    pub fn from_mlp(mlp: Mlp, position_octaves: usize) -> Result<Self> {
        let spec = &mlp.spec;
        if spec.input_width() != encoded_width(3, position_octaves) || spec.output_width() != 1 {
            return Err(Error::Config(format!(
                "occupancy network must map {} encoded inputs to 1 output",
                encoded_width(3, position_octaves)
            )));
        }
        if spec.output_activation != OutputActivation::Sigmoid {
            return Err(Error::Config(
                "occupancy network needs a sigmoid output".into(),
            ));
        }
        Ok(Self {
            mlp,
            position_octaves,
        })
    }

    /// Sphere-initialized network for `config`.
    pub fn new<R: Rng>(config: &FieldConfig, rng: &mut R) -> Result<Self> {
        let mut field = Self::from_mlp(Mlp::zeros(config.occupancy_spec())?, config.position_octaves)?;
        field.init_geometric(config.init_radius, config.init_sharpness, rng)?;
        Ok(field)
    }

    /// Resets the weights so the 0.5 level set approximates a sphere of
    /// `radius` around the origin, with a logit slope of about `sharpness`.
    ///
    /// The first layer projects raw coordinates onto evenly spread unit
    /// directions, so the sum of its rectified outputs is proportional to
    /// `|x|`. Hidden layers start as a slightly perturbed identity and carry
    /// that sum forward; weights reading Fourier features or the skip input
    /// start at zero. The output layer turns the sum into
    /// `sharpness * (radius - |x|)`, calibrated on probes of the target
    /// sphere so softplus offsets do not shift the boundary.
    pub fn init_geometric<R: Rng>(&mut self, radius: f64, sharpness: f64, rng: &mut R) -> Result<()> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("init radius must be positive, got {radius}")));
        }
        if !(sharpness > 0.0) {
            return Err(Error::Config(format!(
                "init sharpness must be positive, got {sharpness}"
            )));
        }
        let spec = self.mlp.spec.clone();
        let last = spec.num_layers() - 1;
        let noise = Normal::new(0.0, IDENTITY_NOISE).expect("finite parameters");
        for l in 0..last {
            let width = spec.layer_widths[l + 1];
            let w = self.mlp.weight_mut(l);
            w.fill(0.0);
            if l == 0 {
                for (i, u) in spread_directions(width).iter().enumerate() {
                    for c in 0..3 {
                        w[[c, i]] = u[c];
                    }
                }
            } else {
                if spec.layer_widths[l] != width {
                    return Err(Error::Config(
                        "geometric initialization needs equal hidden widths".into(),
                    ));
                }
                for r in 0..width {
                    for c in 0..width {
                        w[[r, c]] = noise.sample(rng) + if r == c { 1.0 } else { 0.0 };
                    }
                }
            }
            self.mlp.bias_mut(l).fill(0.0);
        }

        // Calibrate the output layer on the target sphere.
        self.mlp.weight_mut(last).fill(0.0);
        self.mlp.bias_mut(last).fill(0.0);
        let probes: Vec<Vec3> = spread_directions(CALIBRATION_PROBES)
            .into_iter()
            .map(|u| u * radius)
            .collect();
        let attr = self.attributes(&probes);
        let mean_sum = attr.features.sum() / probes.len() as f64;
        if !(mean_sum > 0.0) {
            return Err(Error::Config(
                "geometric initialization produced no active features".into(),
            ));
        }
        let weight = -sharpness * radius / mean_sum;
        self.mlp.weight_mut(last).fill(weight);
        self.mlp.bias_mut(last).fill(sharpness * radius);
        Ok(())
    }

    pub fn feature_width(&self) -> usize {
        self.mlp.spec.hidden_width()
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.mlp.bind(tape)
    }

    /// Records `o(x)` for an `n x 3` point matrix.
    pub fn record(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<OccupancyNodes> {
        let encoded = fourier_encode_var(tape, x, self.position_octaves);
        let out = self.mlp.forward(tape, vars, encoded)?;
        Ok(OccupancyNodes {
            logit: out.pre_activation,
            occupancy: out.output,
            feature: out.hidden,
        })
    }

    /// `d o / d x` per row, itself differentiable in the parameters.
    pub fn input_gradient(tape: &mut Tape, nodes: &OccupancyNodes, x: Var) -> Result<Var> {
        let total = tape.sum_all(nodes.occupancy);
        Ok(tape.grad(total, &[x])?[0])
    }

    /// Unit normals per row, differentiable in the parameters.
    ///
    /// Uses the logit gradient, which points the same way as the occupancy
    /// gradient but does not underflow far from the surface. Normals point
    /// toward increasing occupancy, i.e. into the object.
    pub fn record_normals(tape: &mut Tape, nodes: &OccupancyNodes, x: Var) -> Result<Var> {
        let g = Self::record_logit_gradient(tape, nodes, x)?;
        Ok(normalize_rows(tape, g))
    }

    /// `d logit / d x` per row.
    pub fn record_logit_gradient(tape: &mut Tape, nodes: &OccupancyNodes, x: Var) -> Result<Var> {
        let total = tape.sum_all(nodes.logit);
        Ok(tape.grad(total, &[x])?[0])
    }

    pub fn occupancy_at(&self, x: Vec3) -> f64 {
        self.occupancy(&[x])[0]
    }

    /// Unit normal at `x`; errors when `|grad o(x)| < 1e-12`.
    pub fn normal(&self, x: Vec3) -> Result<Vec3> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let xv = tape.leaf(points_to_matrix(&[x]));
        let nodes = self.record(&mut tape, &vars, xv)?;
        let g = Self::input_gradient(&mut tape, &nodes, xv)?;
        let gv = tape.value(g);
        let grad = Vec3::new(gv[[0, 0]], gv[[0, 1]], gv[[0, 2]]);
        let norm = grad.norm();
        if !(norm >= NORM_FLOOR) {
            return Err(Error::DegenerateNormal(norm));
        }
        Ok(grad / norm)
    }
}

impl OccupancyModel for OccupancyField {
    fn occupancy(&self, points: &[Vec3]) -> Vec<f64> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let vars = self.bind(&mut tape);
            let x = tape.leaf(points_to_matrix(chunk));
            let nodes = self.record(&mut tape, &vars, x).expect("validated field");
            out.extend(tape.value(nodes.occupancy).iter().copied());
        }
        out
    }

    fn attributes(&self, points: &[Vec3]) -> PointAttributes {
        let mut occupancy = Vec::with_capacity(points.len());
        let mut normals = Vec::with_capacity(points.len());
        let mut features = Array2::zeros((points.len(), self.feature_width()));
        for (ci, chunk) in points.chunks(EVAL_CHUNK).enumerate() {
            let mut tape = Tape::new();
            let vars = self.bind(&mut tape);
            let x = tape.leaf(points_to_matrix(chunk));
            let nodes = self.record(&mut tape, &vars, x).expect("validated field");
            let n = Self::record_normals(&mut tape, &nodes, x).expect("validated field");
            occupancy.extend(tape.value(nodes.occupancy).iter().copied());
            let nv = tape.value(n);
            normals.extend(nv.rows().into_iter().map(|r| Vec3::new(r[0], r[1], r[2])));
            let start = ci * EVAL_CHUNK;
            features
                .slice_mut(s![start..start + chunk.len(), ..])
                .assign(tape.value(nodes.feature));
        }
        PointAttributes {
            occupancy,
            normals,
            features,
        }
    }
}

/// Rows of `g` scaled to unit length; rows below `1e-12` stay finite.
pub fn normalize_rows(tape: &mut Tape, g: Var) -> Var {
    let sq = tape.mul(g, g);
    let norm2 = tape.sum_cols(sq);
    let norm = tape.unary(norm2, UnaryFn::Sqrt);
    let inv = tape.unary(norm, UnaryFn::Recip { floor: NORM_FLOOR });
    tape.mul_col(g, inv)
}

/// Color network `(x, n, h, d) -> [0, 1]^3`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorField {
    pub mlp: Mlp,
    pub position_octaves: usize,
    pub direction_octaves: usize,
    pub feature_width: usize,
}

impl ColorField {
    pub fn from_mlp(
        mlp: Mlp,
        position_octaves: usize,
        direction_octaves: usize,
        feature_width: usize,
    ) -> Result<Self> {
        let expected = encoded_width(3, position_octaves) + 3 + feature_width + encoded_width(3, direction_octaves);
        if mlp.spec.input_width() != expected || mlp.spec.output_width() != 3 {
            return Err(Error::Config(format!(
                "color network must map {expected} inputs to 3 outputs"
            )));
        }
        Ok(Self {
            mlp,
            position_octaves,
            direction_octaves,
            feature_width,
        })
    }

    pub fn new<R: Rng>(config: &FieldConfig, rng: &mut R) -> Result<Self> {
        Self::from_mlp(
            Mlp::xavier(config.color_spec(), rng)?,
            config.position_octaves,
            config.direction_octaves,
            config.hidden_width,
        )
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.mlp.bind(tape)
    }

    /// Records colors for row-aligned points, normals, features and directions.
    pub fn record(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        normal: Var,
        feature: Var,
        direction: Var,
    ) -> Result<Var> {
        let ex = fourier_encode_var(tape, x, self.position_octaves);
        let ed = fourier_encode_var(tape, direction, self.direction_octaves);
        let input = tape.concat(&[ex, normal, feature, ed]);
        Ok(self.mlp.forward(tape, vars, input)?.output)
    }

    pub fn color(&self, x: Vec3, n: Vec3, h: &[f64], d: Vec3) -> [f64; 3] {
        let features = Matrix::from_shape_vec((1, h.len()), h.to_vec()).expect("row");
        self.colors(&[x], &[n], &features, &[d])[0]
    }
}

impl ColorModel for ColorField {
    fn colors(&self, points: &[Vec3], normals: &[Vec3], features: &Matrix, directions: &[Vec3]) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(points.len());
        for start in (0..points.len()).step_by(EVAL_CHUNK) {
            let end = (start + EVAL_CHUNK).min(points.len());
            let mut tape = Tape::new();
            let vars = self.bind(&mut tape);
            let x = tape.leaf(points_to_matrix(&points[start..end]));
            let n = tape.leaf(points_to_matrix(&normals[start..end]));
            let h = tape.leaf(features.slice(s![start..end, ..]).to_owned());
            let d = tape.leaf(points_to_matrix(&directions[start..end]));
            let rgb = self.record(&mut tape, &vars, x, n, h, d).expect("validated field");
            out.extend(tape.value(rgb).rows().into_iter().map(|r| [r[0], r[1], r[2]]));
        }
        out
    }
}

/// Both networks of one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Fields {
    pub config: FieldConfig,
    pub occupancy: OccupancyField,
    pub color: ColorField,
}

impl Fields {
    pub fn new(config: FieldConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let occupancy = OccupancyField::new(&config, &mut rng)?;
        let color = ColorField::new(&config, &mut rng)?;
        Ok(Self {
            config,
            occupancy,
            color,
        })
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.occupancy.mlp.params.iter().chain(self.color.mlp.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.occupancy
            .mlp
            .params
            .iter_mut()
            .chain(self.color.mlp.params.iter_mut())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(Param::zero_grad);
    }
}
