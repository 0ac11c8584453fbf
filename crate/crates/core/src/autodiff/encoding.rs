//! Fourier features: `[x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(k-1) pi x), cos(2^(k-1) pi x)]`.

use std::f64::consts::PI;

use ndarray::{concatenate, Array2, Axis};

use super::tape::{Matrix, Tape, Var};
use super::unary;

/// Width of the encoding of a `dim`-vector at `octaves` octaves.
pub fn encoded_width(dim: usize, octaves: usize) -> usize {
    dim * (2 * octaves + 1)
}

fn frequency(octave: usize) -> f64 {
    2f64.powi(octave as i32) * PI
}

pub fn fourier_encode(x: &[f64], octaves: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoded_width(x.len(), octaves));
    out.extend_from_slice(x);
    for j in 0..octaves {
        let f = frequency(j);
        out.extend(x.iter().map(|v| (f * v).sin()));
        out.extend(x.iter().map(|v| (f * v).cos()));
    }
    out
}

/// Row-wise encoding of an `n x d` matrix.
pub fn fourier_encode_matrix(x: &Matrix, octaves: usize) -> Matrix {
    let mut blocks: Vec<Array2<f64>> = vec![x.clone()];
    for j in 0..octaves {
        let f = frequency(j);
        blocks.push(x.mapv(|v| (f * v).sin()));
        blocks.push(x.mapv(|v| (f * v).cos()));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(1), &views).expect("blocks share row count")
}

/// Differentiable row-wise encoding.
pub fn fourier_encode_var(tape: &mut Tape, x: Var, octaves: usize) -> Var {
    if octaves == 0 {
        return x;
    }
    let mut parts = vec![x];
    for j in 0..octaves {
        let f = frequency(j);
        parts.push(tape.unary(x, unary::sin(f)));
        parts.push(tape.unary(x, unary::cos(f)));
    }
    tape.concat(&parts)
}
