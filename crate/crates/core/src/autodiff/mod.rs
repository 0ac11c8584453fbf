//! Differentiation substrate: a matrix tape with second-order support, the
//! Fourier encoding and the multilayer perceptrons built on top of it.

pub mod encoding;
pub mod mlp;
pub mod tape;
pub mod unary;

pub use encoding::{encoded_width, fourier_encode, fourier_encode_matrix, fourier_encode_var};
pub use mlp::{Activation, Mlp, MlpOutput, MlpSpec, OutputActivation, Param};
pub use tape::{Matrix, Tape, Var};
pub use unary::UnaryFn;
