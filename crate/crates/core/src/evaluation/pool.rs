use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolLevel {
    /// Distractors drawn uniformly from the whole test set.
    Easy,
    /// Distractors share the query's Type attribute.
    Difficult,
}

impl std::str::FromStr for PoolLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(PoolLevel::Easy),
            "difficult" => Ok(PoolLevel::Difficult),
            _ => Err(Error::Argument(format!("unknown pool level `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolTask {
    pub level: PoolLevel,
    pub pool_size: usize,
    pub n_queries: usize,
    pub seed: u64,
}

impl PoolTask {
    pub fn new(level: PoolLevel, seed: u64) -> Self {
        PoolTask {
            level,
            pool_size: 10,
            n_queries: 100,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypeTally {
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolReport {
    pub task: PoolTask,
    pub accuracy: f64,
    pub correct: usize,
    pub answered: usize,
    /// (query index, reason) for queries that could not be posed.
    pub skipped: Vec<(usize, String)>,
    /// Accuracy breakdown by the query's Type value.
    pub per_type: BTreeMap<String, TypeTally>,
}

/// Pick-the-painting task: each query text sees its own image among
/// `pool_size - 1` distractors and answers with the highest-scoring image.
/// A tie with the true image counts as a wrong answer.
///
/// `score(text, image)` scores any test pair; `types[i]` is sample `i`'s Type.
pub fn pool_eval<F>(score: F, types: &[String], task: PoolTask) -> Result<PoolReport>
where
    F: Fn(usize, usize) -> f64,
{
    let n = types.len();
    if task.pool_size < 2 {
        return Err(Error::Argument("pool size must be at least 2".into()));
    }
    if n < task.pool_size {
        return Err(Error::Argument(format!(
            "test set of {n} samples cannot fill pools of {}",
            task.pool_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let queries: Vec<usize> = if task.n_queries <= n {
        sample(&mut rng, n, task.n_queries).into_vec()
    } else {
        (0..task.n_queries).map(|_| rng.random_range(0..n)).collect()
    };

    let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in types.iter().enumerate() {
        by_type.entry(t.as_str()).or_default().push(i);
    }
    let all: Vec<usize> = (0..n).collect();

    let mut report = PoolReport {
        task,
        accuracy: 0.0,
        correct: 0,
        answered: 0,
        skipped: Vec::new(),
        per_type: BTreeMap::new(),
    };
    for q in queries {
        let candidates: Vec<usize> = match task.level {
            PoolLevel::Easy => &all,
            PoolLevel::Difficult => &by_type[types[q].as_str()],
        }
        .iter()
        .copied()
        .filter(|&i| i != q)
        .collect();
        if candidates.len() < task.pool_size - 1 {
            report.skipped.push((
                q,
                format!(
                    "type `{}` has {} other samples, {} needed",
                    types[q],
                    candidates.len(),
                    task.pool_size - 1
                ),
            ));
            continue;
        }
        let truth = score(q, q);
        let correct = sample(&mut rng, candidates.len(), task.pool_size - 1)
            .iter()
            .all(|i| score(q, candidates[i]) < truth);
        report.answered += 1;
        let tally = report.per_type.entry(types[q].clone()).or_default();
        tally.total += 1;
        if correct {
            report.correct += 1;
            tally.correct += 1;
        }
    }
    report.accuracy = if report.answered > 0 {
        report.correct as f64 / report.answered as f64
    } else {
        0.0
    };
    Ok(report)
}
