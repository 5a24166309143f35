use rand::Rng;

use crate::error::Result;
use crate::numeric::{
    l2_normalize, l2_normalize_backward, tanh_backward, tanh_forward, Input, Linear,
};

/// Default dimensionality of the joint embedding space.
pub const DEFAULT_DIM: usize = 128;

/// Fully connected layer, tanh, then ℓ2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub linear: Linear,
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HeadCache {
    /// tanh output
    pub hidden: Vec<f64>,
    pub norm: f64,
    /// unit-norm projection
    pub output: Vec<f64>,
}

impl ProjectionHead {
    pub fn new(linear: Linear) -> Self {
        ProjectionHead { linear }
    }

    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        ProjectionHead::new(Linear::init(in_dim, out_dim, rng))
    }

    pub fn in_dim(&self) -> usize {
        self.linear.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.linear.out_dim()
    }

    pub fn forward(&self, x: Input<'_>) -> Result<HeadCache> {
        let hidden = tanh_forward(&self.linear.forward(x)?);
        let (output, norm) = l2_normalize(&hidden)?;
        Ok(HeadCache {
            hidden,
            norm,
            output,
        })
    }

    /// `l2_normalize(tanh(W x + b))`; fails if the tanh output is the zero vector.
    pub fn project(&self, x: Input<'_>) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// Gradient with respect to the pre-activation `W x + b`.
    pub fn backward_pre(&self, cache: &HeadCache, grad_out: &[f64]) -> Vec<f64> {
        let g = l2_normalize_backward(&cache.output, cache.norm, grad_out);
        tanh_backward(&cache.hidden, &g)
    }
}
