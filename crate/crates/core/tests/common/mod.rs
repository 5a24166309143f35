//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use artret_core::dataset::EncodedPair;
use artret_core::numeric::Matrix;
use artret_core::text::{EncodedText, SparseTextVector};
use artret_core::visual::ConvFeatureMap;
use nalgebra::DMatrix;
use rand::Rng;

/// Rank by fully sorting every candidate; among equal scores the true item
/// goes last.
pub fn naive_ranks(scores: &[Vec<f64>], transpose: bool) -> Vec<usize> {
    let n = scores.len();
    let at = |q: usize, c: usize| if transpose { scores[c][q] } else { scores[q][c] };
    (0..n)
        .map(|q| {
            let mut cands: Vec<usize> = (0..n).collect();
            cands.sort_by(|&a, &b| {
                at(q, b)
                    .partial_cmp(&at(q, a))
                    .unwrap()
                    .then((a == q).cmp(&(b == q)))
            });
            cands.iter().position(|&c| c == q).unwrap() + 1
        })
        .collect()
}

pub fn naive_recall(ranks: &[usize], k: usize) -> f64 {
    let mut hits = 0;
    for &r in ranks {
        if r <= k {
            hits += 1;
        }
    }
    hits as f64 / ranks.len() as f64
}

pub fn naive_median(ranks: &[usize]) -> f64 {
    let mut s: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Window starts along one axis: the fewest evenly spaced windows whose
/// spacing does not exceed `max(1, floor(3 side / 5))`.
fn oracle_starts(len: usize, side: usize) -> Vec<usize> {
    if side >= len {
        return vec![0];
    }
    let span = len - side;
    let step = std::cmp::max(1, (3 * side) / 5);
    let mut gaps = 1;
    while gaps * step < span {
        gaps += 1;
    }
    (0..=gaps)
        .map(|i| ((i * span) as f64 / gaps as f64).floor() as usize)
        .collect()
}

/// RMAC by materializing each region as a set of cells and scanning the
/// whole map for membership.
pub fn naive_rmac(map: &ConvFeatureMap, levels: usize) -> Vec<f64> {
    let (c, h, w) = (map.channels(), map.height(), map.width());
    let mut regions: Vec<BTreeSet<(usize, usize)>> = Vec::new();
    for l in 1..=levels {
        let side = ((2 * w.min(h)) as f64 / (l + 1) as f64).ceil() as usize;
        let (rw, rh) = (side.min(w), side.min(h));
        for y0 in oracle_starts(h, rh) {
            for x0 in oracle_starts(w, rw) {
                let mut cells = BTreeSet::new();
                for y in y0..y0 + rh {
                    for x in x0..x0 + rw {
                        cells.insert((y, x));
                    }
                }
                if !regions.contains(&cells) {
                    regions.push(cells);
                }
            }
        }
    }
    let mut total = vec![0.0; c];
    for cells in &regions {
        let mut v = vec![f64::NEG_INFINITY; c];
        for (ch, slot) in v.iter_mut().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    if cells.contains(&(y, x)) {
                        *slot = slot.max(map.at(ch, y, x));
                    }
                }
            }
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 0.0 {
            for (t, a) in total.iter_mut().zip(&v) {
                *t += a / n;
            }
        }
    }
    let n = total.iter().map(|a| a * a).sum::<f64>().sqrt();
    total.iter().map(|a| a / n).collect()
}

fn to_d(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for i in 0..a.ncols() {
        let ma = a.column(i).sum() / n as f64;
        for j in 0..b.ncols() {
            let mb = b.column(j).sum() / n as f64;
            let mut s = 0.0;
            for r in 0..n {
                s += (a[(r, i)] - ma) * (b[(r, j)] - mb);
            }
            out[(i, j)] = s / (n as f64 - 1.0);
        }
    }
    out
}

/// Canonical correlations from the eigenvalues of
/// `Cxx^-1 Cxy Cyy^-1 Cyx`, which are the squared correlations.
pub fn brute_force_cca(x: &Matrix, y: &Matrix, d: usize, ridge: f64) -> Vec<f64> {
    let (x, y) = (to_d(x), to_d(y));
    let reg = |c: DMatrix<f64>| {
        let n = c.nrows();
        c + DMatrix::identity(n, n) * ridge
    };
    let cxx_inv = reg(covariance(&x, &x)).try_inverse().expect("invertible Cxx");
    let cyy_inv = reg(covariance(&y, &y)).try_inverse().expect("invertible Cyy");
    let cxy = covariance(&x, &y);
    let m = cxx_inv * &cxy * cyy_inv * cxy.transpose();
    let mut rho: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re.max(0.0).sqrt())
        .collect();
    rho.sort_by(|a, b| b.partial_cmp(a).unwrap());
    rho.truncate(d);
    rho
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_sparse<R: Rng>(dim: usize, nnz: usize, rng: &mut R) -> SparseTextVector {
    let idx = rand::seq::index::sample(rng, dim, nnz.min(dim)).into_vec();
    SparseTextVector::new(dim, idx.into_iter().map(|i| (i, rng.random_range(0.1..1.0))).collect()).unwrap()
}

/// Random pair with sparse comment/title encodings and a dense image.
pub fn random_pair<R: Rng>(
    id: usize,
    vis_in: usize,
    comment_in: usize,
    title_in: usize,
    label: Option<usize>,
    rng: &mut R,
) -> EncodedPair {
    let text = EncodedText {
        comment: random_sparse(comment_in, 3, rng),
        title: random_sparse(title_in, 2, rng),
    };
    let image = (0..vis_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    EncodedPair::new(format!("p{id}"), text, image, label)
}
