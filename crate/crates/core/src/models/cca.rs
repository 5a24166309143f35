//! Regularized canonical correlation analysis.
//!
//! Both views are centered and whitened with `(Σ + ridge·I)^{-1/2}`; the SVD of
//! the whitened cross-covariance gives the canonical directions and
//! correlations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numeric::{l2_normalize, Matrix};

/// Default ridge added to both covariance matrices.
pub const DEFAULT_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    /// `dx x d`
    pub wx: Matrix,
    /// `dy x d`
    pub wy: Matrix,
    /// Canonical correlations, descending.
    pub correlations: Vec<f64>,
}

/// Which view a vector belongs to. `X` is the visual side, `Y` the textual one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Visual,
    Textual,
}

/// A CCA projection; `degenerate` marks a zero projection that could not be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaProjection {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.set(r, c, m[(r, c)]);
        }
    }
    out
}

fn center(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows() as f64;
    let mean = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n));
    let mut centered = m.clone();
    for (mut col, mu) in centered.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-mu);
    }
    (centered, mean)
}

/// `(c + ridge I)^{-1/2}` through a symmetric eigendecomposition.
fn inverse_sqrt(c: DMatrix<f64>, ridge: f64, view: &str) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let reg = c + DMatrix::identity(n, n) * ridge;
    let eig = SymmetricEigen::new(reg);
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max.max(1.0)) {
        return Err(Error::Numeric(format!(
            "{view} covariance is singular (smallest eigenvalue {min:e}); increase the ridge"
        )));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Fits `d` canonical directions between the rows of `x` (`n x dx`) and `y` (`n x dy`).
pub fn fit_cca(x: &Matrix, y: &Matrix, d: usize, ridge: f64) -> Result<CcaModel> {
    let n = x.rows();
    if y.rows() != n {
        return Err(Error::Argument(format!(
            "views have {} and {} rows",
            x.rows(),
            y.rows()
        )));
    }
    if n < 2 {
        return Err(Error::Argument("CCA needs at least two samples".into()));
    }
    if !(ridge >= 0.0) {
        return Err(Error::Argument(format!("ridge {ridge} must be non-negative")));
    }
    let max_d = x.cols().min(y.cols()).min(n - 1);
    if d == 0 || d > max_d {
        return Err(Error::Argument(format!(
            "CCA dimension {d} must be in 1..={max_d} (min of dx, dy, n - 1)"
        )));
    }

    let (xc, mean_x) = center(&to_dmatrix(x));
    let (yc, mean_y) = center(&to_dmatrix(y));
    let scale = 1.0 / (n as f64 - 1.0);
    let cxx = xc.transpose() * &xc * scale;
    let cyy = yc.transpose() * &yc * scale;
    let cxy = xc.transpose() * &yc * scale;

    let kx = inverse_sqrt(cxx, ridge, "visual")?;
    let ky = inverse_sqrt(cyy, ridge, "textual")?;
    let t = &kx * cxy * &ky;
    let svd = t.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not return Vᵀ".into()))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.truncate(d);

    let u_d = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = v_t.transpose();
    let v_d = DMatrix::from_columns(&order.iter().map(|&i| v.column(i)).collect::<Vec<_>>());
    let wx = kx * u_d;
    let wy = ky * v_d;

    Ok(CcaModel {
        mean_x: mean_x.iter().copied().collect(),
        mean_y: mean_y.iter().copied().collect(),
        wx: from_dmatrix(&wx),
        wy: from_dmatrix(&wy),
        correlations: order.iter().map(|&i| svd.singular_values[i]).collect(),
    })
}

impl CcaModel {
    pub fn dim(&self) -> usize {
        self.correlations.len()
    }

    /// Unnormalized canonical variates `Wᵀ (x - mean)`.
    pub fn transform(&self, x: &[f64], view: View) -> Result<Vec<f64>> {
        let (w, mean) = match view {
            View::Visual => (&self.wx, &self.mean_x),
            View::Textual => (&self.wy, &self.mean_y),
        };
        if x.len() != mean.len() {
            return Err(Error::Argument(format!(
                "{view:?} input has dim {}, model expects {}",
                x.len(),
                mean.len()
            )));
        }
        let centered: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
        w.mul_vec_t(&centered)
    }

    /// ℓ2-normalized canonical variates, ready for cosine scoring.
    pub fn project(&self, x: &[f64], view: View) -> Result<CcaProjection> {
        let z = self.transform(x, view)?;
        Ok(match l2_normalize(&z) {
            Ok((values, _)) => CcaProjection {
                values,
                degenerate: false,
            },
            Err(_) => CcaProjection {
                values: vec![0.0; z.len()],
                degenerate: true,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn identical_views_have_unit_correlations() {
        let x = random(20, 5, 1);
        let m = fit_cca(&x, &x, 5, 0.0).unwrap();
        for r in &m.correlations {
            assert!((r - 1.0).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn dimension_bounds() {
        let x = random(6, 5, 2);
        let y = random(6, 4, 3);
        assert!(fit_cca(&x, &y, 5, 0.0).is_err());
        assert!(fit_cca(&x, &y, 0, 0.0).is_err());
        assert!(fit_cca(&x, &random(5, 4, 4), 2, 0.0).is_err());
        let x3 = random(3, 5, 5);
        assert!(fit_cca(&x3, &random(3, 4, 6), 3, 1e-3).is_err());
    }

    #[test]
    fn singular_covariance_without_ridge_errors() {
        let mut x = random(10, 3, 7);
        for r in 0..10 {
            let v = x.get(r, 0);
            x.set(r, 2, 2.0 * v);
        }
        let y = random(10, 2, 8);
        assert!(matches!(fit_cca(&x, &y, 2, 0.0), Err(Error::Numeric(_))));
        assert!(fit_cca(&x, &y, 2, 1e-3).is_ok());
    }

    #[test]
    fn projecting_the_mean_is_degenerate() {
        let x = random(12, 3, 9);
        let y = random(12, 3, 10);
        let m = fit_cca(&x, &y, 2, 1e-4).unwrap();
        let p = m.project(&m.mean_x.clone(), View::Visual).unwrap();
        assert!(p.degenerate);
        assert!(m.project(&[1.0], View::Textual).is_err());
    }

    #[test]
    fn one_dimensional_hand_case() {
        // x = [-1, 1], y = [-2, 2]: var_x = 2, var_y = 8, cov = 4, rho = 1,
        // wx = 1/sqrt(2), wy = 1/sqrt(8).
        let x = Matrix::from_vec(2, 1, vec![-1.0, 1.0]).unwrap();
        let y = Matrix::from_vec(2, 1, vec![-2.0, 2.0]).unwrap();
        let m = fit_cca(&x, &y, 1, 0.0).unwrap();
        assert!((m.correlations[0] - 1.0).abs() < 1e-12);
        assert!((m.wx.get(0, 0).abs() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((m.wy.get(0, 0).abs() - (1.0 / 8f64.sqrt())).abs() < 1e-12);
        let zx = m.transform(&[1.0], View::Visual).unwrap()[0];
        let zy = m.transform(&[2.0], View::Textual).unwrap()[0];
        assert!(zx * zy > 0.0);
    }
}
