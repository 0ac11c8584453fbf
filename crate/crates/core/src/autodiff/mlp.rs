//! Fully connected networks recorded on a [`Tape`].

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Matrix, Tape, Var};
use super::unary::UnaryFn;
use crate::error::{Error, Result};

/// A trainable array and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let grad = Array2::zeros(value.dim());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus { beta: f64 },
    Relu,
}

impl Activation {
    fn unary(self) -> UnaryFn {
        match self {
            Activation::Softplus { beta } => UnaryFn::Softplus { beta },
            Activation::Relu => UnaryFn::Relu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    None,
}

/// Network shape.
///
/// `layer_widths` lists the input width, every hidden width and the output
/// width, so a spec with `n` widths has `n - 1` linear layers. Linear layer
/// `l` in `skip_layers` receives `[hidden || input]` instead of `hidden`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub skip_layers: Vec<usize>,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn num_layers(&self) -> usize {
        self.layer_widths.len().saturating_sub(1)
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    /// Width of the hidden features returned alongside the output.
    pub fn hidden_width(&self) -> usize {
        self.layer_widths[self.layer_widths.len() - 2]
    }

    /// Input width of linear layer `l`, including the skip concatenation.
    pub fn layer_input_width(&self, l: usize) -> usize {
        let skip = if self.skip_layers.contains(&l) {
            self.input_width()
        } else {
            0
        };
        self.layer_widths[l] + skip
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(
                "an MLP needs at least an input and an output width".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        for &l in &self.skip_layers {
            if l == 0 || l >= self.num_layers() {
                return Err(Error::Config(format!(
                    "skip layer {l} is outside 1..{}",
                    self.num_layers()
                )));
            }
        }
        if let Activation::Softplus { beta } = self.activation {
            if !(beta > 0.0) {
                return Err(Error::Config("softplus beta must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Tape nodes produced by [`Mlp::forward`].
#[derive(Clone, Copy, Debug)]
pub struct MlpOutput {
    /// Output after the output activation.
    pub output: Var,
    /// Output of the last linear layer.
    pub pre_activation: Var,
    /// Activations entering the last linear layer.
    pub hidden: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    /// `[w0, b0, w1, b1, ...]`; weights are `in x out`, biases `1 x out`.
    pub params: Vec<Param>,
}

impl Mlp {
    /// Zero weights and biases.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let params = (0..spec.num_layers())
            .flat_map(|l| {
                let (i, o) = (spec.layer_input_width(l), spec.layer_widths[l + 1]);
                [
                    Param::new(Array2::zeros((i, o))),
                    Param::new(Array2::zeros((1, o))),
                ]
            })
            .collect();
        Ok(Self { spec, params })
    }

    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn xavier<R: Rng>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(spec)?;
        for l in 0..mlp.spec.num_layers() {
            let w = &mut mlp.params[2 * l].value;
            let (fan_in, fan_out) = w.dim();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
        Ok(mlp)
    }

    pub fn weight(&self, l: usize) -> &Matrix {
        &self.params[2 * l].value
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut Matrix {
        &mut self.params[2 * l].value
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut Matrix {
        &mut self.params[2 * l + 1].value
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone())).collect()
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<MlpOutput> {
        let spec = &self.spec;
        let (_, width) = tape.shape(input);
        if width != spec.input_width() {
            return Err(Error::Config(format!(
                "network expects input width {}, got {width}",
                spec.input_width()
            )));
        }
        if vars.len() != self.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameter nodes, got {}",
                self.params.len(),
                vars.len()
            )));
        }
        let act = spec.activation.unary();
        let last = spec.num_layers() - 1;
        let mut h = input;
        let mut hidden = input;
        let mut pre = input;
        for l in 0..spec.num_layers() {
            let x = if spec.skip_layers.contains(&l) {
                tape.concat(&[h, input])
            } else {
                h
            };
            let z = tape.matmul(x, vars[2 * l]);
            let z = tape.add_row(z, vars[2 * l + 1]);
            if l == last {
                hidden = h;
                pre = z;
            } else {
                h = tape.unary(z, act);
            }
        }
        let output = match spec.output_activation {
            OutputActivation::Sigmoid => tape.unary(pre, UnaryFn::Sigmoid { beta: 1.0, order: 0 }),
            OutputActivation::None => pre,
        };
        Ok(MlpOutput {
            output,
            pre_activation: pre,
            hidden,
        })
    }

    /// Evaluates a single input vector, returning `(output, hidden)`.
    pub fn forward_vector(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let x = tape.leaf(Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row"));
        let out = self.forward(&mut tape, &vars, x)?;
        Ok((
            tape.value(out.output).iter().copied().collect(),
            tape.value(out.hidden).iter().copied().collect(),
        ))
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Param::zero_grad);
    }
}
