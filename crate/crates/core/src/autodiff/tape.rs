//! Reverse-mode differentiation over dense row-major matrices.
//!
//! Gradients are themselves recorded as tape nodes, so a gradient can be fed
//! back into a loss and differentiated again (double backpropagation). Ops
//! whose vector-Jacobian product is only available numerically record it as a
//! [`Op::Detached`] node; asking for a derivative through such a node is a
//! usage error rather than a silent zero.

use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis, Zip};

use super::unary::{Derivative, UnaryFn};
use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    /// Value-only node computed from `from`; not differentiable.
    Detached {
        from: Vec<Var>,
        what: &'static str,
    },
    /// `op(a) * op(b)` where `op` optionally transposes.
    MatMul {
        a: Var,
        b: Var,
        ta: bool,
        tb: bool,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine {
        x: Var,
        scale: f64,
    },
    /// `x + row`, row broadcast over rows.
    AddRow {
        x: Var,
        row: Var,
    },
    /// `x * col`, column broadcast over columns.
    MulCol {
        x: Var,
        col: Var,
    },
    SumRows(Var),
    SumCols(Var),
    SumAll(Var),
    BroadcastRows(Var),
    BroadcastCols(Var),
    Fill(Var),
    Unary {
        x: Var,
        f: UnaryFn,
    },
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Pad {
        x: Var,
        start: usize,
    },
    SegmentSum {
        x: Var,
        offsets: Arc<[usize]>,
    },
    SegmentBroadcast {
        x: Var,
        offsets: Arc<[usize]>,
    },
    CompositeWeights {
        o: Var,
        offsets: Arc<[usize]>,
    },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Detached { from, .. } => from.clone(),
            Op::MatMul { a, b, .. } => vec![*a, *b],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::AddRow { x, row } => vec![*x, *row],
            Op::MulCol { x, col } => vec![*x, *col],
            Op::Affine { x, .. }
            | Op::SumRows(x)
            | Op::SumCols(x)
            | Op::SumAll(x)
            | Op::BroadcastRows(x)
            | Op::BroadcastCols(x)
            | Op::Fill(x)
            | Op::Unary { x, .. }
            | Op::Slice { x, .. }
            | Op::Pad { x, .. }
            | Op::SegmentSum { x, .. }
            | Op::SegmentBroadcast { x, .. } => vec![*x],
            Op::CompositeWeights { o, .. } => vec![*o],
            Op::Concat(parts) => parts.clone(),
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Append-only record of matrix operations.
///
/// Every node's parents precede it, so a single reverse sweep visits nodes in
/// a valid order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn gemm(a: &Matrix, ta: bool, b: &Matrix, tb: bool) -> Matrix {
    let av = if ta { a.t() } else { a.view() };
    let bv = if tb { b.t() } else { b.view() };
    av.dot(&bv)
}

/// Per-segment weights `o_i * prod_{j<i} (1 - o_j)`; `offsets` delimit segments.
pub(crate) fn segment_weights(o: &[f64], offsets: &[usize]) -> Vec<f64> {
    let mut w = vec![0.0; o.len()];
    for seg in offsets.windows(2) {
        let mut transmittance = 1.0;
        for i in seg[0]..seg[1] {
            w[i] = o[i] * transmittance;
            transmittance *= 1.0 - o[i];
        }
    }
    w
}

/// Vector-Jacobian product of [`segment_weights`] without divisions by `1 - o`.
pub(crate) fn segment_weights_vjp(o: &[f64], g: &[f64], offsets: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; o.len()];
    for seg in offsets.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if lo == hi {
            continue;
        }
        let mut transmittance = vec![1.0; hi - lo];
        for i in lo + 1..hi {
            transmittance[i - lo] = transmittance[i - lo - 1] * (1.0 - o[i - 1]);
        }
        // tail = sum_{i>k} g_i o_i prod_{k<j<i} (1 - o_j)
        let mut tail = 0.0;
        for k in (lo..hi).rev() {
            out[k] = transmittance[k - lo] * (g[k] - tail);
            tail = g[k] * o[k] + (1.0 - o[k]) * tail;
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Leaf node: a constant input or a parameter snapshot.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let v = gemm(self.value(a), ta, self.value(b), tb);
        self.push(v, Op::MatMul { a, b, ta, tb })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// `scale * x + shift`
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(x).mapv(|e| scale * e + shift);
        self.push(v, Op::Affine { x, scale })
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.affine(x, scale, 0.0)
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "add_row expects a 1xN row");
        let v = self.value(x) + r;
        self.push(v, Op::AddRow { x, row })
    }

    pub fn mul_col(&mut self, x: Var, col: Var) -> Var {
        let c = self.value(col);
        assert_eq!(c.ncols(), 1, "mul_col expects an Nx1 column");
        let v = self.value(x) * c;
        self.push(v, Op::MulCol { x, col })
    }

    pub fn sum_rows(&mut self, x: Var) -> Var {
        let v = self.value(x).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(v, Op::SumRows(x))
    }

    pub fn sum_cols(&mut self, x: Var) -> Var {
        let v = self.value(x).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::SumCols(x))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(v, Op::SumAll(x))
    }

    pub fn broadcast_rows(&mut self, x: Var, rows: usize) -> Var {
        let v = self
            .value(x)
            .broadcast((rows, self.shape(x).1))
            .expect("broadcast_rows expects a 1xN row")
            .to_owned();
        self.push(v, Op::BroadcastRows(x))
    }

    pub fn broadcast_cols(&mut self, x: Var, cols: usize) -> Var {
        let v = self
            .value(x)
            .broadcast((self.shape(x).0, cols))
            .expect("broadcast_cols expects an Nx1 column")
            .to_owned();
        self.push(v, Op::BroadcastCols(x))
    }

    pub fn fill(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let v = Array2::from_elem((rows, cols), self.scalar(x));
        self.push(v, Op::Fill(x))
    }

    pub fn unary(&mut self, x: Var, f: UnaryFn) -> Var {
        let v = self.value(x).mapv(|e| f.eval(e));
        self.push(v, Op::Unary { x, f })
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat expects equal row counts");
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + len`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.value(x).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::Slice { x, start })
    }

    /// Embeds `x` at column `start` of a zero matrix with `total` columns.
    pub fn pad(&mut self, x: Var, start: usize, total: usize) -> Var {
        let (rows, cols) = self.shape(x);
        let mut v = Array2::zeros((rows, total));
        v.slice_mut(s![.., start..start + cols]).assign(self.value(x));
        self.push(v, Op::Pad { x, start })
    }

    /// Sums the rows of each segment `offsets[i]..offsets[i + 1]`.
    pub fn segment_sum(&mut self, x: Var, offsets: Arc<[usize]>) -> Var {
        let xv = self.value(x);
        let mut v = Array2::zeros((offsets.len() - 1, xv.ncols()));
        for (seg, mut out) in offsets.windows(2).zip(v.rows_mut()) {
            for r in seg[0]..seg[1] {
                out += &xv.row(r);
            }
        }
        self.push(v, Op::SegmentSum { x, offsets })
    }

    /// Repeats row `i` of `x` over segment `i`.
    pub fn segment_broadcast(&mut self, x: Var, offsets: Arc<[usize]>) -> Var {
        let xv = self.value(x);
        let n = *offsets.last().unwrap_or(&0);
        let mut v = Array2::zeros((n, xv.ncols()));
        for (i, seg) in offsets.windows(2).enumerate() {
            for r in seg[0]..seg[1] {
                v.row_mut(r).assign(&xv.row(i));
            }
        }
        self.push(v, Op::SegmentBroadcast { x, offsets })
    }

    /// Compositing weights of an `n x 1` occupancy column, per segment.
    pub fn composite_weights(&mut self, o: Var, offsets: Arc<[usize]>) -> Var {
        let ov = self.value(o);
        assert_eq!(ov.ncols(), 1, "composite_weights expects an Nx1 column");
        let occ: Vec<f64> = ov.iter().copied().collect();
        let w = segment_weights(&occ, &offsets);
        let v = Array2::from_shape_vec((w.len(), 1), w).expect("shape");
        self.push(v, Op::CompositeWeights { o, offsets })
    }

    fn accumulate(&mut self, adj: &mut [Option<Var>], node: Var, contribution: Var) {
        adj[node.0] = Some(match adj[node.0] {
            None => contribution,
            Some(prev) => self.add(prev, contribution),
        });
    }

    /// Gradient of the scalar `output` with respect to each of `wrt`.
    ///
    /// The returned nodes live on this tape and may be used in further
    /// computations, including another call to `grad`. Inputs that `output`
    /// does not depend on receive a zero matrix.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        if output.0 >= self.nodes.len() {
            return Err(Error::Usage(format!(
                "node {} has not been recorded on this tape",
                output.0
            )));
        }
        if self.shape(output) != (1, 1) {
            return Err(Error::Usage(format!(
                "gradient requires a scalar output, got shape {:?}",
                self.shape(output)
            )));
        }
        let n = output.0 + 1;
        let mut requires = vec![false; n];
        for w in wrt {
            if w.0 < n {
                requires[w.0] = true;
            }
        }
        for i in 0..n {
            if !requires[i] && self.nodes[i].op.parents().iter().any(|p| requires[p.0]) {
                requires[i] = true;
            }
        }

        let mut adj: Vec<Option<Var>> = vec![None; n];
        if requires[output.0] {
            adj[output.0] = Some(self.scalar_leaf(1.0));
        }
        for i in (0..n).rev() {
            let Some(g) = adj[i] else { continue };
            let op = self.nodes[i].op.clone();
            let needs = |v: &Var| requires[v.0];
            if !op.parents().iter().any(needs) {
                continue;
            }
            match op {
                Op::Leaf => {}
                Op::Detached { what, .. } => {
                    return Err(Error::Usage(format!(
                        "cannot differentiate through the gradient of {what}"
                    )));
                }
                Op::MatMul { a, b, ta, tb } => {
                    if needs(&a) {
                        let da = if !ta {
                            self.matmul_t(g, false, b, !tb)
                        } else {
                            self.matmul_t(b, tb, g, true)
                        };
                        self.accumulate(&mut adj, a, da);
                    }
                    if needs(&b) {
                        let db = if !tb {
                            self.matmul_t(a, !ta, g, false)
                        } else {
                            self.matmul_t(g, true, a, ta)
                        };
                        self.accumulate(&mut adj, b, db);
                    }
                }
                Op::Add(a, b) => {
                    if needs(&a) {
                        self.accumulate(&mut adj, a, g);
                    }
                    if needs(&b) {
                        self.accumulate(&mut adj, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if needs(&a) {
                        self.accumulate(&mut adj, a, g);
                    }
                    if needs(&b) {
                        let nb = self.scale(g, -1.0);
                        self.accumulate(&mut adj, b, nb);
                    }
                }
                Op::Mul(a, b) => {
                    if needs(&a) {
                        let da = self.mul(g, b);
                        self.accumulate(&mut adj, a, da);
                    }
                    if needs(&b) {
                        let db = self.mul(g, a);
                        self.accumulate(&mut adj, b, db);
                    }
                }
                Op::Affine { x, scale, .. } => {
                    let dx = self.scale(g, scale);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::AddRow { x, row } => {
                    if needs(&x) {
                        self.accumulate(&mut adj, x, g);
                    }
                    if needs(&row) {
                        let dr = self.sum_rows(g);
                        self.accumulate(&mut adj, row, dr);
                    }
                }
                Op::MulCol { x, col } => {
                    if needs(&x) {
                        let dx = self.mul_col(g, col);
                        self.accumulate(&mut adj, x, dx);
                    }
                    if needs(&col) {
                        let gx = self.mul(g, x);
                        let dc = self.sum_cols(gx);
                        self.accumulate(&mut adj, col, dc);
                    }
                }
                Op::SumRows(x) => {
                    let rows = self.shape(x).0;
                    let dx = self.broadcast_rows(g, rows);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::SumCols(x) => {
                    let cols = self.shape(x).1;
                    let dx = self.broadcast_cols(g, cols);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::SumAll(x) => {
                    let (r, c) = self.shape(x);
                    let dx = self.fill(g, r, c);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::BroadcastRows(x) => {
                    let dx = self.sum_rows(g);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::BroadcastCols(x) => {
                    let dx = self.sum_cols(g);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::Fill(x) => {
                    let dx = self.sum_all(g);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::Unary { x, f } => match f.derivative() {
                    Derivative::Zero => {}
                    Derivative::Fn(df) => {
                        let d = self.unary(x, df);
                        let dx = self.mul(g, d);
                        self.accumulate(&mut adj, x, dx);
                    }
                    Derivative::Unsupported => {
                        return Err(Error::Usage(format!(
                            "derivative of {f:?} is not available"
                        )));
                    }
                },
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let len = self.shape(p).1;
                        if needs(&p) {
                            let dp = self.slice(g, start, len);
                            self.accumulate(&mut adj, p, dp);
                        }
                        start += len;
                    }
                }
                Op::Slice { x, start } => {
                    let total = self.shape(x).1;
                    let dx = self.pad(g, start, total);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::Pad { x, start } => {
                    let len = self.shape(x).1;
                    let dx = self.slice(g, start, len);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::SegmentSum { x, offsets } => {
                    let dx = self.segment_broadcast(g, offsets);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::SegmentBroadcast { x, offsets } => {
                    let dx = self.segment_sum(g, offsets);
                    self.accumulate(&mut adj, x, dx);
                }
                Op::CompositeWeights { o, offsets } => {
                    let ov: Vec<f64> = self.value(o).iter().copied().collect();
                    let gv: Vec<f64> = self.value(g).iter().copied().collect();
                    let d = segment_weights_vjp(&ov, &gv, &offsets);
                    let d = Array2::from_shape_vec((d.len(), 1), d).expect("shape");
                    let dx = self.push(
                        d,
                        Op::Detached {
                            from: vec![o, g],
                            what: "composite weights",
                        },
                    );
                    self.accumulate(&mut adj, o, dx);
                }
            }
        }

        Ok(wrt
            .iter()
            .map(|w| match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(*w);
                    self.leaf(Array2::zeros(shape))
                }
            })
            .collect())
    }

    /// Numeric gradients of `output` with respect to `wrt`.
    pub fn backward(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Matrix>> {
        let grads = self.grad(output, wrt)?;
        Ok(grads.iter().map(|g| self.value(*g).clone()).collect())
    }
}

/// Elementwise `a += b`, used when merging gradient buffers.
pub fn add_assign(a: &mut Matrix, b: &Matrix) {
    Zip::from(a).and(b).for_each(|x, y| *x += *y);
}
