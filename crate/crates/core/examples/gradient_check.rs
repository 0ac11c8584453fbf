//! Reverse-mode gradients of an MLP, and of its input gradient, against
//! central differences.
//!
//! `cargo run --release --example gradient_check`

use ndarray::Array2;
use unisurf::autodiff::{Tape, UnaryFn};
use unisurf::rng;

fn main() -> unisurf::Result<()> {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng::stream(0, 0);
    let mut normal = |rows, cols| Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut r));
    let (x0, w0, v0) = (normal(5, 3), normal(3, 8), normal(8, 1));
    let act = UnaryFn::Softplus { beta: 10.0 };

    // Loss: sum of squared input gradients of sum(softplus(x w) v).
    let loss = |w: &Array2<f64>, grads: bool| -> unisurf::Result<(f64, Option<Array2<f64>>)> {
        let mut tape = Tape::new();
        let (x, w, v) = (tape.leaf(x0.clone()), tape.leaf(w.clone()), tape.leaf(v0.clone()));
        let h = tape.matmul(x, w);
        let h = tape.unary(h, act);
        let y = tape.matmul(h, v);
        let y = tape.sum_all(y);
        let dx = tape.grad(y, &[x])?[0];
        let sq = tape.mul(dx, dx);
        let l = tape.sum_all(sq);
        let g = if grads { Some(tape.backward(l, &[w])?.remove(0)) } else { None };
        Ok((tape.scalar(l), g))
    };

    let (_, analytic) = loss(&w0, true)?;
    let analytic = analytic.expect("requested");
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..w0.nrows() {
        for j in 0..w0.ncols() {
            let mut wp = w0.clone();
            wp[[i, j]] += h;
            let mut wm = w0.clone();
            wm[[i, j]] -= h;
            let fd = (loss(&wp, false)?.0 - loss(&wm, false)?.0) / (2.0 * h);
            let a = analytic[[i, j]];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
        }
    }
    println!("worst relative error of the second-order gradient: {worst:.2e}");
    Ok(())
}
