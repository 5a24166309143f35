use crate::error::{Error, Result};
use crate::text::SparseTextVector;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// A layer input, either dense or sparse (tf-idf).
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Dense(&'a [f64]),
    Sparse(&'a SparseTextVector),
}

impl Input<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Input::Dense(x) => x.len(),
            Input::Sparse(s) => s.dim(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Input::Dense(x) => x.to_vec(),
            Input::Sparse(s) => s.to_dense(),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("matrix contains non-finite values".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self * x` for a dense or sparse `x`.
    pub fn mul_vec(&self, x: Input<'_>) -> Result<Vec<f64>> {
        if x.dim() != self.cols {
            return Err(Error::Argument(format!(
                "cannot multiply {}x{} matrix by vector of dim {}",
                self.rows,
                self.cols,
                x.dim()
            )));
        }
        Ok(match x {
            Input::Dense(x) => (0..self.rows).map(|r| dot(self.row(r), x)).collect(),
            Input::Sparse(s) => (0..self.rows)
                .map(|r| {
                    let row = self.row(r);
                    s.entries().iter().map(|&(i, w)| row[i] * w).sum()
                })
                .collect(),
        })
    }

    /// `selfᵀ * g`.
    pub fn mul_vec_t(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.rows {
            return Err(Error::Argument(format!(
                "cannot multiply transpose of {}x{} matrix by vector of dim {}",
                self.rows,
                self.cols,
                g.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &gr) in g.iter().enumerate() {
            if gr != 0.0 {
                for (o, w) in out.iter_mut().zip(self.row(r)) {
                    *o += gr * w;
                }
            }
        }
        Ok(out)
    }

    /// `self += g xᵀ`.
    pub fn add_outer(&mut self, g: &[f64], x: Input<'_>) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(x.dim(), self.cols);
        for (r, &gr) in g.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            match x {
                Input::Dense(x) => row.iter_mut().zip(x).for_each(|(w, xi)| *w += gr * xi),
                Input::Sparse(s) => {
                    for &(i, xi) in s.entries() {
                        row[i] += gr * xi;
                    }
                }
            }
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Argument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                dst.iter_mut().zip(orow).for_each(|(d, b)| *d += a * b);
            }
        }
        Ok(out)
    }
}
