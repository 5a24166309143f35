//! Dense linear algebra, layers with hand-written gradients, Adam and
//! finite-difference gradient checking. Everything runs in `f64`.

mod adam;
mod gradcheck;
mod layers;
mod matrix;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, numeric_gradient, relative_error};
pub use layers::{
    cosine, cross_entropy, cross_entropy_backward, l2_normalize, l2_normalize_backward, softmax,
    tanh_backward, tanh_forward, Linear, LinearGrad, EPS_NORM, UNIT_TOLERANCE,
};
pub use matrix::{dot, norm, Input, Matrix};
