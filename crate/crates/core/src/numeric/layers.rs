use rand::Rng;

use super::matrix::{dot, norm, Input, Matrix};
use crate::error::{Error, Result};

/// Inputs to [`l2_normalize`] with a smaller norm are rejected.
pub const EPS_NORM: f64 = 1e-12;
/// How far from 1 a "unit" vector's norm may drift.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients of a loss with respect to a [`Linear`] layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearGrad {
    pub fn zeros_like(layer: &Linear) -> Self {
        LinearGrad {
            weight: Matrix::zeros(layer.weight.rows(), layer.weight.cols()),
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weight.as_mut_slice().iter_mut().for_each(|w| *w *= s);
        self.bias.iter_mut().for_each(|b| *b *= s);
    }
}

impl Linear {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::Argument(format!(
                "bias of length {} does not match {} output rows",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Linear { weight, bias })
    }

    /// Uniform `(-1/sqrt(in), 1/sqrt(in))` initialization of weights and bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let mut sample = || rng.random_range(-bound..bound);
        let weight: Vec<f64> = (0..in_dim * out_dim).map(|_| sample()).collect();
        let bias: Vec<f64> = (0..out_dim).map(|_| sample()).collect();
        Linear {
            weight: Matrix::from_vec(out_dim, in_dim, weight).expect("shape"),
            bias,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: Input<'_>) -> Result<Vec<f64>> {
        let mut y = self.weight.mul_vec(x)?;
        y.iter_mut().zip(&self.bias).for_each(|(y, b)| *y += b);
        Ok(y)
    }

    /// Gradient with respect to the input, `Wᵀ g`.
    pub fn backward_input(&self, grad_out: &[f64]) -> Result<Vec<f64>> {
        self.weight.mul_vec_t(grad_out)
    }

    /// Adds this sample's parameter gradients (`g xᵀ`, `g`) into `acc`.
    pub fn accumulate(&self, x: Input<'_>, grad_out: &[f64], acc: &mut LinearGrad) {
        acc.weight.add_outer(grad_out, x);
        acc.bias.iter_mut().zip(grad_out).for_each(|(a, g)| *a += g);
    }

    /// Input and parameter gradients for a single sample.
    pub fn backward(&self, x: Input<'_>, grad_out: &[f64]) -> Result<(Vec<f64>, LinearGrad)> {
        if grad_out.len() != self.out_dim() || x.dim() != self.in_dim() {
            return Err(Error::Argument("linear backward shape mismatch".into()));
        }
        let mut g = LinearGrad::zeros_like(self);
        self.accumulate(x, grad_out, &mut g);
        Ok((self.backward_input(grad_out)?, g))
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weight.as_mut_slice(), &mut self.bias]
    }

    pub fn param_sizes(&self) -> [usize; 2] {
        [self.weight.as_slice().len(), self.bias.len()]
    }
}

pub fn tanh_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Backward through `y = tanh(x)` given the forward output `y`.
pub fn tanh_backward(y: &[f64], grad_out: &[f64]) -> Vec<f64> {
    y.iter().zip(grad_out).map(|(y, g)| g * (1.0 - y * y)).collect()
}

/// Returns `x / |x|` and `|x|`.
pub fn l2_normalize(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(x);
    if !(n > EPS_NORM) {
        return Err(Error::Degenerate(format!(
            "cannot normalize vector with norm {n:e}"
        )));
    }
    Ok((x.iter().map(|v| v / n).collect(), n))
}

/// Backward through `y = x / |x|`: `(I - y yᵀ) g / |x|`.
pub fn l2_normalize_backward(y: &[f64], norm: f64, grad_out: &[f64]) -> Vec<f64> {
    let yg = dot(y, grad_out);
    y.iter()
        .zip(grad_out)
        .map(|(y, g)| (g - y * yg) / norm)
        .collect()
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "cosine of vectors with dims {} and {}",
            u.len(),
            v.len()
        )));
    }
    for (name, w) in [("first", u), ("second", v)] {
        let n = norm(w);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Contract(format!("{name} cosine input has norm {n}")));
        }
    }
    Ok(dot(u, v).clamp(-1.0, 1.0))
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_class(x: &[f64], class: usize) -> Result<()> {
    if class >= x.len() {
        return Err(Error::Argument(format!(
            "class {class} out of range for {} logits",
            x.len()
        )));
    }
    Ok(())
}

/// `-log softmax(x)[class]` in log-sum-exp form.
pub fn cross_entropy(x: &[f64], class: usize) -> Result<f64> {
    check_class(x, class)?;
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(lse - x[class])
}

/// `softmax(x) - onehot(class)`.
pub fn cross_entropy_backward(x: &[f64], class: usize) -> Result<Vec<f64>> {
    check_class(x, class)?;
    let mut g = softmax(x);
    g[class] -= 1.0;
    Ok(g)
}
