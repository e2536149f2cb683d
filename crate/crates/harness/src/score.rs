//! pass@k and its spread.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verify::EvalRecord;

pub const ESTIMATOR: &str = "unbiased 1 - C(n-c,k)/C(n,k), mean over problems";
pub const STD_METHOD: &str = "subset bootstrap: k of n attempts per problem without replacement, population std of corpus means";
pub const DEFAULT_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("problem {id} has {n} attempts, fewer than k={k}")]
    TooFewAttempts { id: String, n: usize, k: usize },
    #[error("need at least 2 resamples, got {0}")]
    Resamples(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtN {
    pub k: usize,
    pub per_problem: BTreeMap<String, f64>,
    pub mean: f64,
    pub std: Option<f64>,
    pub n: BTreeMap<String, usize>,
    pub c: BTreeMap<String, usize>,
}

/// 1 - C(n-c, k) / C(n, k), as a running product to stay in range.
pub fn estimate(n: usize, c: usize, k: usize) -> f64 {
    assert!(k <= n && c <= n);
    if n - c < k {
        return 1.0;
    }
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    1.0 - miss
}

/// Attempts and successes per problem. Records sharing a (problem, attempt)
/// key count once; a success wins.
pub fn tally(records: &[EvalRecord]) -> BTreeMap<String, Vec<bool>> {
    let mut by: BTreeMap<String, BTreeMap<usize, bool>> = BTreeMap::new();
    for r in records {
        *by.entry(r.problem_id.clone()).or_default().entry(r.attempt).or_default() |= r.compiled;
    }
    by.into_iter().map(|(id, m)| (id, m.into_values().collect())).collect()
}

fn checked(t: &BTreeMap<String, Vec<bool>>, k: usize) -> Result<(), ScoreError> {
    if k == 0 {
        return Err(ScoreError::ZeroK);
    }
    for (id, v) in t {
        if v.len() < k {
            return Err(ScoreError::TooFewAttempts { id: id.clone(), n: v.len(), k });
        }
    }
    Ok(())
}

pub fn pass_at_k(records: &[EvalRecord], k: usize) -> Result<PassAtN, ScoreError> {
    let t = tally(records);
    checked(&t, k)?;
    let mut out = PassAtN { k, per_problem: BTreeMap::new(), mean: 0.0, std: None, n: BTreeMap::new(), c: BTreeMap::new() };
    for (id, v) in &t {
        let n = v.len();
        let c = v.iter().filter(|b| **b).count();
        out.per_problem.insert(id.clone(), estimate(n, c, k));
        out.n.insert(id.clone(), n);
        out.c.insert(id.clone(), c);
    }
    if !t.is_empty() {
        out.mean = out.per_problem.values().sum::<f64>() / t.len() as f64;
    }
    Ok(out)
}

/// Standard deviation of the corpus pass@k indicator mean over `resamples`
/// draws of k attempts per problem.
pub fn dispersion(records: &[EvalRecord], k: usize, resamples: usize, seed: u64) -> Result<f64, ScoreError> {
    if resamples < 2 {
        return Err(ScoreError::Resamples(resamples));
    }
    let t = tally(records);
    checked(&t, k)?;
    if t.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let solved = t
                .values()
                .filter(|v| sample(&mut rng, v.len(), k).into_iter().any(|i| v[i]))
                .count();
            solved as f64 / t.len() as f64
        })
        .collect();
    let mu = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / means.len() as f64;
    Ok(var.sqrt())
}

/// pass@k with its bootstrap std filled in.
pub fn score(records: &[EvalRecord], k: usize, resamples: usize, seed: u64) -> Result<PassAtN, ScoreError> {
    let mut p = pass_at_k(records, k)?;
    p.std = Some(dispersion(records, k, resamples, seed)?);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(estimate(4, 0, 2), 0.0);
        assert_eq!(estimate(2, 1, 1), 0.5);
        assert!((estimate(4, 2, 2) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(estimate(3, 1, 3), 1.0);
    }
}
