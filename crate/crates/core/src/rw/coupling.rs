//! Block-wise maximal coupling of a blocked Bernoulli walk with the
//! Poisson(1) - 1 walk.

use rand::Rng;

use super::pmf::{poisson_binomial_pmf, poisson_pmf, total_variation, DiscreteSampler};
use super::walk::{error_terms, WalkSpec};
use crate::error::{Error, Result};

/// Maximal coupling of two pmfs on `0..`.
#[derive(Debug, Clone)]
pub struct MaximalCoupling {
    agree: f64,
    common: Option<DiscreteSampler>,
    only_a: Option<DiscreteSampler>,
    only_b: Option<DiscreteSampler>,
}

impl MaximalCoupling {
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        let len = a.len().max(b.len());
        let get = |v: &[f64], x: usize| v.get(x).copied().unwrap_or(0.0);
        let common: Vec<f64> = (0..len).map(|x| get(a, x).min(get(b, x))).collect();
        let agree: f64 = common.iter().sum::<f64>().min(1.0);
        let ra: Vec<f64> = (0..len).map(|x| (get(a, x) - common[x]).max(0.0)).collect();
        let rb: Vec<f64> = (0..len).map(|x| (get(b, x) - common[x]).max(0.0)).collect();
        let build = |v: &[f64]| (v.iter().sum::<f64>() > 0.0).then(|| DiscreteSampler::new(v));
        MaximalCoupling {
            agree,
            common: build(&common),
            only_a: build(&ra),
            only_b: build(&rb),
        }
    }

    /// Probability that the two coordinates differ, i.e. the TV distance.
    pub fn disagreement(&self) -> f64 {
        1.0 - self.agree
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let u: f64 = rng.random();
        match (&self.common, &self.only_a, &self.only_b) {
            (Some(c), _, _) if u < self.agree => {
                let x = c.sample(rng);
                (x, x)
            }
            (_, Some(a), Some(b)) => (a.sample(rng), b.sample(rng)),
            (Some(c), _, _) => {
                let x = c.sample(rng);
                (x, x)
            }
            _ => unreachable!("coupling of empty pmfs"),
        }
    }
}

/// Paths `S_{k+m} - S_m` and `Shat_k` for `k = 0..=n-m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    pub s: Vec<i64>,
    pub s_hat: Vec<i64>,
    /// First `k` with `S_{k+m} - S_m != Shat_k`.
    pub first_disagreement: Option<usize>,
}

/// Per-block couplings for blocks `m+1..=n`, built once and sampled many times.
#[derive(Debug, Clone)]
pub struct PoissonCoupler {
    m: usize,
    blocks: Vec<MaximalCoupling>,
    block_pmfs: Vec<Vec<f64>>,
    poisson: Vec<f64>,
}

impl PoissonCoupler {
    pub fn new(spec: &WalkSpec, m: usize, n: usize, term_cap: usize) -> Result<Self> {
        if m > n || n > spec.blocks() {
            return Err(Error::InvalidParameter(format!(
                "need m <= n <= {} blocks, got m = {m}, n = {n}",
                spec.blocks()
            )));
        }
        let poisson = poisson_pmf(1.0);
        let mut blocks = Vec::with_capacity(n - m);
        let mut block_pmfs = Vec::with_capacity(n - m);
        for k in m + 1..=n {
            let pmf = poisson_binomial_pmf(spec.block(k), term_cap).map_err(|e| match e {
                Error::BlockTooLarge { terms, cap, .. } => Error::BlockTooLarge { block: k, terms, cap },
                other => other,
            })?;
            blocks.push(MaximalCoupling::new(&pmf, &poisson));
            block_pmfs.push(pmf);
        }
        Ok(PoissonCoupler {
            m,
            blocks,
            block_pmfs,
            poisson,
        })
    }

    /// Exact pmf of `Y_k` for a block in the coupled range.
    pub fn block_pmf(&self, k: usize) -> &[f64] {
        &self.block_pmfs[k - self.m - 1]
    }

    pub fn poisson_pmf(&self) -> &[f64] {
        &self.poisson
    }

    /// `1 - prod_k (1 - TV_k)`: exact disagreement probability of the
    /// independent block couplings.
    pub fn exact_disagreement_probability(&self) -> f64 {
        1.0 - self.blocks.iter().map(|b| 1.0 - b.disagreement()).product::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoupledPaths {
        let len = self.blocks.len();
        let mut s = Vec::with_capacity(len + 1);
        let mut s_hat = Vec::with_capacity(len + 1);
        s.push(0i64);
        s_hat.push(0i64);
        let mut first = None;
        for (idx, b) in self.blocks.iter().enumerate() {
            let (y, z) = b.sample(rng);
            s.push(s[idx] + y as i64 - 1);
            s_hat.push(s_hat[idx] + z as i64 - 1);
            if first.is_none() && y != z {
                first = Some(idx + 1);
            }
        }
        CoupledPaths {
            s,
            s_hat,
            first_disagreement: first,
        }
    }
}

pub fn couple_poisson<R: Rng + ?Sized>(spec: &WalkSpec, m: usize, n: usize, rng: &mut R) -> Result<CoupledPaths> {
    Ok(PoissonCoupler::new(spec, m, n, super::pmf::DEFAULT_TERM_CAP)?.sample(rng))
}

/// `2 sum_{j=j_m+1}^{j_n} r_j^2 + 2 sum_{k=m}^n delta_k`, with `delta_0 = 0`.
pub fn coupling_bound(spec: &WalkSpec, m: usize, n: usize) -> Result<f64> {
    let e = error_terms(spec, n)?;
    let r2: f64 = (spec.boundary(m) + 1..=spec.boundary(n)).map(|j| spec.r(j).powi(2)).sum();
    let d: f64 = e.delta[m..=n].iter().sum();
    Ok(2.0 * r2 + 2.0 * d)
}

/// Sum of per-block TV distances, each bounded by `sum r^2 + delta_k`.
pub fn blockwise_tv(spec: &WalkSpec, m: usize, n: usize) -> Result<Vec<f64>> {
    let poisson = poisson_pmf(1.0);
    (m + 1..=n)
        .map(|k| Ok(total_variation(&poisson_binomial_pmf(spec.block(k), super::pmf::DEFAULT_TERM_CAP)?, &poisson)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_block_forces_y_zero() {
        let spec = WalkSpec::new(vec![0.0; 3], vec![1, 4]).unwrap();
        let c = PoissonCoupler::new(&spec, 0, 1, 1000).unwrap();
        assert!((c.exact_disagreement_probability() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut diff = 0;
        for _ in 0..20_000 {
            let p = c.sample(&mut rng);
            assert_eq!(p.s[1], -1);
            diff += p.first_disagreement.is_some() as u32;
        }
        let f = diff as f64 / 20_000.0;
        assert!((f - 0.632).abs() < 0.015);
    }

    #[test]
    fn exact_disagreement_below_bound() {
        let spec = WalkSpec::uniform_blocks(10, 50).unwrap();
        let c = PoissonCoupler::new(&spec, 2, 10, 100_000).unwrap();
        let bound = coupling_bound(&spec, 2, 10).unwrap();
        assert!(c.exact_disagreement_probability() <= bound);
        let tv: f64 = blockwise_tv(&spec, 2, 10).unwrap().iter().sum();
        assert!(c.exact_disagreement_probability() <= tv + 1e-12);
    }

    #[test]
    fn identical_pmfs_never_disagree() {
        let mc = MaximalCoupling::new(&[0.2, 0.8], &[0.2, 0.8]);
        assert!(mc.disagreement().abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (a, b) = mc.sample(&mut rng);
            assert_eq!(a, b);
        }
    }
}
