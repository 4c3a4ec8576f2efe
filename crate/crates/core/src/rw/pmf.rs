//! Exact pmfs of block sums and a CDF sampler over them.

use rand::Rng;

use crate::error::{Error, Result};

/// Mass dropped from the upper tail of every pmf.
pub const TAIL_TRUNCATION: f64 = 1e-15;

/// Default bound on `block length * support` work in the Poisson-binomial DP.
pub const DEFAULT_TERM_CAP: usize = 1_000_000;

/// Pmf of `sum_i 1{U_i <= probs_i}` on `0..len`, with the upper tail below
/// [`TAIL_TRUNCATION`] removed and the rest renormalised.
pub fn poisson_binomial_pmf(probs: &[f64], term_cap: usize) -> Result<Vec<f64>> {
    let mut pmf = vec![1.0];
    let mut terms = 0usize;
    for (idx, &r) in probs.iter().enumerate() {
        terms += pmf.len();
        if terms > term_cap {
            return Err(Error::BlockTooLarge {
                block: idx,
                terms,
                cap: term_cap,
            });
        }
        if r == 0.0 {
            continue;
        }
        pmf.push(0.0);
        for x in (1..pmf.len()).rev() {
            pmf[x] = pmf[x] * (1.0 - r) + pmf[x - 1] * r;
        }
        pmf[0] *= 1.0 - r;
        trim_tail(&mut pmf);
    }
    normalise(&mut pmf);
    Ok(pmf)
}

/// Poisson pmf truncated once the retained mass reaches `1 - TAIL_TRUNCATION`.
pub fn poisson_pmf(mean: f64) -> Vec<f64> {
    let mut pmf = vec![(-mean).exp()];
    let mut mass = pmf[0];
    let mut x = 0usize;
    while mass < 1.0 - TAIL_TRUNCATION && x < 10_000 {
        x += 1;
        let next = pmf[x - 1] * mean / x as f64;
        pmf.push(next);
        mass += next;
        if next == 0.0 && x as f64 > mean {
            break;
        }
    }
    normalise(&mut pmf);
    pmf
}

fn trim_tail(pmf: &mut Vec<f64>) {
    let mut tail = 0.0;
    while pmf.len() > 1 {
        let last = *pmf.last().unwrap();
        if tail + last < TAIL_TRUNCATION {
            tail += last;
            pmf.pop();
        } else {
            break;
        }
    }
}

fn normalise(pmf: &mut [f64]) {
    let s: f64 = pmf.iter().sum();
    for v in pmf.iter_mut() {
        *v /= s;
    }
}

/// Total variation distance between two pmfs on `0..`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|x| (a.get(x).copied().unwrap_or(0.0) - b.get(x).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0
}

/// Inverse-CDF sampler on `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSampler {
    cdf: Vec<f64>,
}

impl DiscreteSampler {
    /// `weights` need not be normalised but must have a positive sum.
    pub fn new(weights: &[f64]) -> Self {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cdf.push(acc);
        }
        assert!(acc > 0.0, "sampler needs positive total mass");
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        DiscreteSampler { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}
