use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{median_rank, rank_queries, recall_at_k, Direction, ScoreMatrix, RECALL_KS};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Monte Carlo estimate of the metrics a uniform-random scorer achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBaseline {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Mean R@K per direction, in [`RECALL_KS`] order.
    pub recall: [[f64; 3]; 2],
    /// Mean of the per-trial median ranks per direction.
    pub median_rank: [f64; 2],
}

impl RandomBaseline {
    pub fn r_at(&self, direction: Direction, k: usize) -> f64 {
        let d = direction as usize;
        RECALL_KS
            .iter()
            .position(|&x| x == k)
            .map_or(f64::NAN, |i| self.recall[d][i])
    }
}

/// Ranks `n` paired items under i.i.d. uniform scores, `trials` times.
/// Trial `t` draws from ChaCha8 stream `t` of `seed`, so the result does not
/// depend on the execution strategy.
pub fn random_baseline(n: usize, trials: usize, seed: u64, exec: Exec) -> Result<RandomBaseline> {
    if n == 0 || trials == 0 {
        return Err(Error::Argument("random baseline needs n > 0 and trials > 0".into()));
    }
    let per_trial = exec.map_range(trials, |t| -> Result<[[f64; 4]; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let scores: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let m = ScoreMatrix::from_vec(n, n, scores)?;
        let mut out = [[0.0; 4]; 2];
        for d in Direction::BOTH {
            let ranks = rank_queries(&m, d, Exec::Sequential)?;
            for (i, &k) in RECALL_KS.iter().enumerate() {
                out[d as usize][i] = recall_at_k(&ranks, k)?;
            }
            out[d as usize][3] = median_rank(&ranks)?;
        }
        Ok(out)
    });
    let mut sums = [[0.0; 4]; 2];
    for trial in per_trial {
        let trial = trial?;
        for d in 0..2 {
            for i in 0..4 {
                sums[d][i] += trial[d][i];
            }
        }
    }
    let mean = |d: usize, i: usize| sums[d][i] / trials as f64;
    Ok(RandomBaseline {
        n,
        trials,
        seed,
        recall: [
            [mean(0, 0), mean(0, 1), mean(0, 2)],
            [mean(1, 0), mean(1, 1), mean(1, 2)],
        ],
        median_rank: [mean(0, 3), mean(1, 3)],
    })
}

/// Deterministic pseudo-random score in `[0, 1)` for a (text, image) pair.
pub fn uniform_score(seed: u64, text: usize, img: usize) -> f64 {
    // splitmix64 finalizer over the mixed inputs
    let mut z = seed
        ^ (text as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (img as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}
