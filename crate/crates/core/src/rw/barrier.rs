//! Two-barrier probabilities for walks with increments at least -1.

use rand::Rng;
use rayon::prelude::*;

use super::pmf::{poisson_binomial_pmf, DiscreteSampler};
use super::renewal::{Direction, PoissonJumps, RenewalTable};
use super::walk::WalkSpec;
use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::stats::wilson_interval;

/// Law of the `k`-th increment of a walk, `k >= 1`; increments must be `>= -1`.
pub trait StepLaw: Sync {
    fn steps(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> i64;
}

/// Homogeneous `Poisson(1) - 1` steps, unbounded horizon.
#[derive(Debug, Clone)]
pub struct PoissonSteps(PoissonJumps);

impl PoissonSteps {
    pub fn new() -> Self {
        PoissonSteps(PoissonJumps::new(Direction::Ascending))
    }
}

impl Default for PoissonSteps {
    fn default() -> Self {
        Self::new()
    }
}

impl StepLaw for PoissonSteps {
    fn steps(&self) -> usize {
        usize::MAX
    }

    fn sample<R: Rng + ?Sized>(&self, _k: usize, rng: &mut R) -> i64 {
        self.0.sample(rng)
    }
}

/// Steps `Y_k - 1` of a [`WalkSpec`], each drawn from the block's exact pmf.
#[derive(Debug, Clone)]
pub struct SpecSteps {
    samplers: Vec<DiscreteSampler>,
}

impl SpecSteps {
    pub fn new(spec: &WalkSpec, term_cap: usize) -> Result<Self> {
        let samplers = (1..=spec.blocks())
            .map(|k| Ok(DiscreteSampler::new(&poisson_binomial_pmf(spec.block(k), term_cap)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpecSteps { samplers })
    }
}

impl StepLaw for SpecSteps {
    fn steps(&self) -> usize {
        self.samplers.len()
    }

    fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> i64 {
        self.samplers[k - 1].sample(rng) as i64 - 1
    }
}

/// Event `max_{k <= floor(lambda n)} S_k <= K`,
/// `max_{floor(lambda n) <= i <= n} S_i <= L`, `S_n = L - a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEvent {
    pub k: u32,
    pub l: i64,
    pub a: u32,
    pub lambda: f64,
    pub n: usize,
}

impl BarrierEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} outside (0, 1)", self.lambda)));
        }
        Ok(())
    }

    pub fn split(&self) -> usize {
        (self.lambda * self.n as f64).floor() as usize
    }

    pub fn target(&self) -> i64 {
        self.l - self.a as i64
    }

    /// Runs one path, stopping as soon as the event is decided.
    pub fn occurs<S: StepLaw, R: Rng + ?Sized>(&self, steps: &S, rng: &mut R) -> bool {
        let m = self.split();
        let (k_bar, l_bar, target) = (self.k as i64, self.l, self.target());
        let n = self.n;
        let mut s = 0i64;
        if m == 0 && s > l_bar {
            return false;
        }
        for k in 1..=n {
            s += steps.sample(k, rng);
            if (k <= m && s > k_bar) || (k >= m && s > l_bar) {
                return false;
            }
            if s - ((n - k) as i64) > target {
                return false;
            }
        }
        s == target
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEstimate {
    pub successes: u64,
    pub replicas: u64,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

const CHUNK: u64 = 20_000;

/// Monte Carlo estimate with a 95% Wilson interval. Replicas are split into
/// fixed chunks with their own generators, so the result does not depend on
/// the thread count.
pub fn barrier_probability<S: StepLaw>(steps: &S, event: &BarrierEvent, replicas: u64, seed: u64) -> Result<BarrierEstimate> {
    event.validate()?;
    if steps.steps() < event.n {
        return Err(Error::InvalidParameter(format!(
            "step law covers {} steps, event needs {}",
            steps.steps(),
            event.n
        )));
    }
    let chunks = replicas.div_ceil(CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replica_rng(seed, event.n as u64, c);
            let todo = CHUNK.min(replicas - c * CHUNK);
            (0..todo).filter(|_| event.occurs(steps, &mut rng)).count() as u64
        })
        .sum();
    let (ci_low, ci_high) = wilson_interval(successes, replicas, 1.959_963_984_540_054);
    Ok(BarrierEstimate {
        successes,
        replicas,
        probability: successes as f64 / replicas as f64,
        ci_low,
        ci_high,
    })
}

/// `sqrt(2/pi) R(K) R^-(a) / (n^{3/2} rho rho^-)`.
pub fn barrier_prediction(r: &RenewalTable, r_minus: &RenewalTable, event: &BarrierEvent) -> Result<f64> {
    let (k, a) = (event.k as usize, event.a as usize);
    if k >= r.values.len() || a >= r_minus.values.len() {
        return Err(Error::InvalidParameter("renewal tables too short for K or a".into()));
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * r.r(k) * r_minus.r(a)
        / ((event.n as f64).powf(1.5) * r.rho * r_minus.rho))
}
