use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numeric::{dot, norm, UNIT_TOLERANCE};

/// The cut-offs reported for every direction.
pub const RECALL_KS: [usize; 3] = [1, 5, 10];

/// Cosine similarity of every text projection (rows) with every image projection (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_text: usize,
    n_img: usize,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_vec(n_text: usize, n_img: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != n_text * n_img {
            return Err(Error::Argument(format!(
                "{n_text}x{n_img} score matrix needs {} values, got {}",
                n_text * n_img,
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Argument("score matrix contains non-finite values".into()));
        }
        Ok(ScoreMatrix {
            n_text,
            n_img,
            scores,
        })
    }

    pub fn n_text(&self) -> usize {
        self.n_text
    }

    pub fn n_img(&self) -> usize {
        self.n_img
    }

    #[inline]
    pub fn get(&self, text: usize, img: usize) -> f64 {
        self.scores[text * self.n_img + img]
    }

    pub fn row(&self, text: usize) -> &[f64] {
        &self.scores[text * self.n_img..(text + 1) * self.n_img]
    }

    pub fn transpose(&self) -> ScoreMatrix {
        let mut t = vec![0.0; self.scores.len()];
        for r in 0..self.n_text {
            for c in 0..self.n_img {
                t[c * self.n_text + r] = self.get(r, c);
            }
        }
        ScoreMatrix {
            n_text: self.n_img,
            n_img: self.n_text,
            scores: t,
        }
    }
}

fn check_projections(name: &str, vs: &[Vec<f64>], dim: usize) -> Result<()> {
    for (i, v) in vs.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::Argument(format!(
                "{name} projection {i} has dim {}, expected {dim}",
                v.len()
            )));
        }
        let n = norm(v);
        // Zero vectors mark degenerate projections and score 0 against everything.
        if n != 0.0 && (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Contract(format!("{name} projection {i} has norm {n}")));
        }
    }
    Ok(())
}

/// Full pairwise cosine matrix of unit-norm projections.
pub fn score_all(text: &[Vec<f64>], vis: &[Vec<f64>], exec: Exec) -> Result<ScoreMatrix> {
    let dim = text.first().or(vis.first()).map_or(0, Vec::len);
    check_projections("text", text, dim)?;
    check_projections("visual", vis, dim)?;
    let rows = exec.map_slice(text, |t| {
        vis.iter().map(|v| dot(t, v).clamp(-1.0, 1.0)).collect::<Vec<f64>>()
    });
    ScoreMatrix::from_vec(text.len(), vis.len(), rows.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    TextToImage,
    ImageToText,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::TextToImage, Direction::ImageToText];

    pub fn short(self) -> &'static str {
        match self {
            Direction::TextToImage => "t2i",
            Direction::ImageToText => "i2t",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Rank of the ground-truth item (the diagonal) for every query:
/// `1 + #{other items scoring >= the true item}`. Ties count against the query.
pub fn rank_queries(scores: &ScoreMatrix, direction: Direction, exec: Exec) -> Result<Vec<usize>> {
    let n = scores.n_text;
    if n != scores.n_img {
        return Err(Error::Argument(format!(
            "ranking needs a square score matrix, got {}x{}",
            scores.n_text, scores.n_img
        )));
    }
    Ok(match direction {
        Direction::TextToImage => exec.map_range(n, |q| {
            let row = scores.row(q);
            let truth = row[q];
            1 + row
                .iter()
                .enumerate()
                .filter(|&(j, &s)| j != q && s >= truth)
                .count()
        }),
        Direction::ImageToText => {
            // Stream rows instead of walking columns; partial counts per row
            // block are summed afterwards.
            let diag: Vec<f64> = (0..n).map(|q| scores.get(q, q)).collect();
            let block = 64;
            let partial = exec.map_range(n.div_ceil(block), |b| {
                let mut counts = vec![0usize; n];
                for j in b * block..((b + 1) * block).min(n) {
                    for (q, (&s, &truth)) in scores.row(j).iter().zip(&diag).enumerate() {
                        if s >= truth && q != j {
                            counts[q] += 1;
                        }
                    }
                }
                counts
            });
            let mut ranks = vec![1usize; n];
            for counts in partial {
                ranks.iter_mut().zip(counts).for_each(|(r, c)| *r += c);
            }
            ranks
        }
    })
}

/// Fraction of queries whose true item ranks within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Argument("recall of an empty ranking".into()));
    }
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Median rank; the mean of the two central ranks for even counts.
pub fn median_rank(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Argument("median of an empty ranking".into()));
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub direction: Direction,
    pub recall: BTreeMap<usize, f64>,
    pub median_rank: f64,
    pub n_queries: usize,
}

impl EvalReport {
    pub fn from_ranks(direction: Direction, ranks: &[usize]) -> Result<Self> {
        let recall = RECALL_KS
            .iter()
            .map(|&k| Ok((k, recall_at_k(ranks, k)?)))
            .collect::<Result<_>>()?;
        Ok(EvalReport {
            direction,
            recall,
            median_rank: median_rank(ranks)?,
            n_queries: ranks.len(),
        })
    }

    pub fn r_at(&self, k: usize) -> f64 {
        self.recall.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// Text-to-image and image-to-text reports for paired projections.
pub fn evaluate(text: &[Vec<f64>], vis: &[Vec<f64>], exec: Exec) -> Result<[EvalReport; 2]> {
    let scores = score_all(text, vis, exec)?;
    let t2i = rank_queries(&scores, Direction::TextToImage, exec)?;
    let i2t = rank_queries(&scores, Direction::ImageToText, exec)?;
    Ok([
        EvalReport::from_ranks(Direction::TextToImage, &t2i)?,
        EvalReport::from_ranks(Direction::ImageToText, &i2t)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pair_scores_one() {
        let s = score_all(&[vec![0.6, 0.8]], &[vec![0.6, 0.8]], Exec::Sequential).unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-15);
        let s = score_all(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        assert!(score_all(&[vec![1.0, 0.0]], &[vec![1.0]], Exec::Sequential).is_err());
        assert!(score_all(&[vec![2.0, 0.0]], &[vec![1.0, 0.0]], Exec::Sequential).is_err());
    }

    #[test]
    fn identity_matrix_ranks_first() {
        let n = 4;
        let m: Vec<f64> = (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let s = ScoreMatrix::from_vec(n, n, m).unwrap();
        for d in Direction::BOTH {
            assert_eq!(rank_queries(&s, d, Exec::Sequential).unwrap(), vec![1; n]);
        }
    }

    #[test]
    fn third_best_is_rank_three() {
        let s = ScoreMatrix::from_vec(
            3,
            3,
            vec![0.5, 0.9, 0.7, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(rank_queries(&s, Direction::TextToImage, Exec::Sequential).unwrap()[0], 3);
    }

    #[test]
    fn constant_scores_rank_last() {
        let s = ScoreMatrix::from_vec(5, 5, vec![0.3; 25]).unwrap();
        assert_eq!(rank_queries(&s, Direction::ImageToText, Exec::Sequential).unwrap(), vec![5; 5]);
        assert!(rank_queries(&ScoreMatrix::from_vec(2, 3, vec![0.0; 6]).unwrap(), Direction::TextToImage, Exec::Sequential).is_err());
    }

    #[test]
    fn recall_and_median() {
        let ranks = [1, 5, 100];
        assert!((recall_at_k(&ranks, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((recall_at_k(&ranks, 5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(median_rank(&ranks).unwrap(), 5.0);
        assert_eq!(median_rank(&[1, 1, 1, 1]).unwrap(), 1.0);
        assert_eq!(median_rank(&[1, 2, 9, 4]).unwrap(), 3.0);
        for k in RECALL_KS {
            assert_eq!(recall_at_k(&[1, 1], k).unwrap(), 1.0);
        }
        assert!(median_rank(&[]).is_err());
    }
}
