//! Weight and fitness sequences with lazily memoized prefix sums.
//!
//! Every sequence is indexed from 1. Prefix sums are the primary data: the
//! weight at `i` is always reported as `W(i) - W(i - 1)`, so the two never
//! disagree in floating point.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{Error, Result};
use crate::stats::linear_fit;

/// Prefix caches grow by at least this many entries at a time.
const BLOCK: usize = 4096;

/// Law of i.i.d. weights or fitnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IidLaw {
    Exponential { mean: f64 },
    Uniform { low: f64, high: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl IidLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            IidLaw::Exponential { mean } => mean,
            IidLaw::Uniform { low, high } => 0.5 * (low + high),
            IidLaw::Gamma { shape, scale } => shape * scale,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            IidLaw::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            IidLaw::Uniform { low, high } => low >= 0.0 && high > low && high.is_finite(),
            IidLaw::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad i.i.d. law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            IidLaw::Exponential { mean } => mean * Exp::new(1.0).unwrap().sample(rng),
            IidLaw::Uniform { low, high } => rng.random_range(low..high),
            IidLaw::Gamma { shape, scale } => Gamma::new(shape, scale).unwrap().sample(rng),
        }
    }

    /// Parses `exp:MEAN`, `uniform:LOW:HIGH` or `gamma:SHAPE:SCALE`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::InvalidParameter(format!("missing field in law `{s}`")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("law `{s}`: {e}")))
        };
        let law = match parts[0] {
            "exp" if parts.len() == 2 => IidLaw::Exponential { mean: num(1)? },
            "uniform" if parts.len() == 3 => IidLaw::Uniform {
                low: num(1)?,
                high: num(2)?,
            },
            "gamma" if parts.len() == 3 => IidLaw::Gamma {
                shape: num(1)?,
                scale: num(2)?,
            },
            _ => return Err(Error::InvalidParameter(format!("unknown law `{s}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

impl fmt::Display for IidLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            IidLaw::Exponential { mean } => write!(f, "exp:{mean}"),
            IidLaw::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
            IidLaw::Gamma { shape, scale } => write!(f, "gamma:{shape}:{scale}"),
        }
    }
}

/// Prefix sums `P(0) = 0, P(1), ...` extended on demand by a sequential
/// generator. Readers share an `Arc` snapshot; extension takes the write lock.
struct LazyPrefix {
    inner: RwLock<PrefixState>,
}

struct PrefixState {
    prefix: Arc<Vec<f64>>,
    rng: Option<ChaCha8Rng>,
}

impl LazyPrefix {
    fn new(rng: Option<ChaCha8Rng>) -> Self {
        LazyPrefix {
            inner: RwLock::new(PrefixState {
                prefix: Arc::new(vec![0.0]),
                rng,
            }),
        }
    }

    /// Snapshot holding at least `P(0..=n)`. `next(i, prefix, rng)` returns
    /// `P(i)` given `P(0..i)`.
    fn get<F>(&self, n: usize, mut next: F) -> Arc<Vec<f64>>
    where
        F: FnMut(usize, &[f64], Option<&mut ChaCha8Rng>) -> f64,
    {
        {
            let guard = self.inner.read().unwrap();
            if guard.prefix.len() > n {
                return Arc::clone(&guard.prefix);
            }
        }
        let mut guard = self.inner.write().unwrap();
        if guard.prefix.len() <= n {
            let target = (n + 1).max(guard.prefix.len() + BLOCK).max(2 * guard.prefix.len());
            let state = &mut *guard;
            let mut v: Vec<f64> = Vec::with_capacity(target);
            v.extend_from_slice(&state.prefix);
            for i in v.len()..target {
                let p = next(i, &v, state.rng.as_mut());
                v.push(p);
            }
            state.prefix = Arc::new(v);
        }
        Arc::clone(&guard.prefix)
    }

    fn duplicate(&self) -> Self {
        let guard = self.inner.read().unwrap();
        LazyPrefix {
            inner: RwLock::new(PrefixState {
                prefix: Arc::clone(&guard.prefix),
                rng: guard.rng.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitnessKind {
    Constant(f64),
    Iid { law: IidLaw, seed: u64 },
    /// Zero beyond the end of the list.
    Explicit(Arc<Vec<f64>>),
}

/// Fitnesses `a(i) >= 0` of a preferential attachment tree.
pub struct FitnessSequence {
    kind: FitnessKind,
    cache: LazyPrefix,
    pub declared_zeta: Option<f64>,
}

impl Clone for FitnessSequence {
    fn clone(&self) -> Self {
        FitnessSequence {
            kind: self.kind.clone(),
            cache: self.cache.duplicate(),
            declared_zeta: self.declared_zeta,
        }
    }
}

impl fmt::Debug for FitnessSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FitnessSequence")
            .field("kind", &self.kind)
            .field("declared_zeta", &self.declared_zeta)
            .finish()
    }
}

impl FitnessSequence {
    pub fn constant(a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidFitness { index: 1, value: a });
        }
        Ok(FitnessSequence {
            kind: FitnessKind::Constant(a),
            cache: LazyPrefix::new(None),
            declared_zeta: (a > 0.0).then_some(a),
        })
    }

    pub fn iid(law: IidLaw, seed: u64) -> Result<Self> {
        law.validate()?;
        Ok(FitnessSequence {
            kind: FitnessKind::Iid { law, seed },
            cache: LazyPrefix::new(Some(ChaCha8Rng::seed_from_u64(seed))),
            declared_zeta: Some(law.mean()),
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        for (i, &a) in values.iter().enumerate() {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidFitness { index: i + 1, value: a });
            }
        }
        Ok(FitnessSequence {
            kind: FitnessKind::Explicit(Arc::new(values)),
            cache: LazyPrefix::new(None),
            declared_zeta: None,
        })
    }

    pub fn kind(&self) -> &FitnessKind {
        &self.kind
    }

    /// `A(0..=n)`.
    pub fn prefix_sums(&self, n: usize) -> Arc<Vec<f64>> {
        let kind = &self.kind;
        self.cache.get(n, |i, prev, rng| {
            let a = match kind {
                FitnessKind::Constant(a) => *a,
                FitnessKind::Iid { law, .. } => law.sample(rng.expect("iid fitness carries an rng")),
                FitnessKind::Explicit(v) => v.get(i - 1).copied().unwrap_or(0.0),
            };
            prev[i - 1] + a
        })
    }

    pub fn partial_sum(&self, n: usize) -> f64 {
        match self.kind {
            FitnessKind::Constant(a) => a * n as f64,
            _ => self.prefix_sums(n)[n],
        }
    }

    pub fn a(&self, i: usize) -> f64 {
        assert!(i >= 1, "fitnesses are indexed from 1");
        match self.kind {
            FitnessKind::Constant(a) => a,
            _ => {
                let p = self.prefix_sums(i);
                p[i] - p[i - 1]
            }
        }
    }

    /// `a(1..=n)` as a vector with a placeholder at index 0.
    pub fn values(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        match self.kind {
            FitnessKind::Constant(a) => out[1..].iter_mut().for_each(|x| *x = a),
            _ => {
                let p = self.prefix_sums(n);
                for i in 1..=n {
                    out[i] = p[i] - p[i - 1];
                }
            }
        }
        out
    }

    /// Parses `constant:A`, `iid:<law>:SEED` or `explicit:PATH`.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(rest) = spec.strip_prefix("constant:") {
            let a = rest
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("fitness `{spec}`: {e}")))?;
            FitnessSequence::constant(a)
        } else if let Some(rest) = spec.strip_prefix("iid:") {
            let (law, seed) = split_seed(rest)?;
            FitnessSequence::iid(IidLaw::parse(law)?, seed)
        } else if let Some(path) = spec.strip_prefix("explicit:") {
            FitnessSequence::explicit(read_float_lines(path)?)
        } else {
            Err(Error::InvalidParameter(format!("unknown fitness spec `{spec}`")))
        }
    }
}

#[derive(Debug, Clone)]
pub enum WeightKind {
    /// `w(i) = c`.
    Constant(f64),
    /// `W(n) = lambda * n^gamma` exactly.
    PowerLaw { lambda: f64, gamma: f64 },
    /// `w(i) = scale * i^exponent`.
    Monomial { scale: f64, exponent: f64 },
    Iid { law: IidLaw, seed: u64 },
    /// Random weights whose tree law equals the preferential attachment tree
    /// with the given fitnesses.
    PatDerived { fitness: FitnessSequence, seed: u64 },
    /// Zero beyond the end of the list.
    Explicit(Arc<Vec<f64>>),
    /// Mass of `2..=level` moved onto vertex 1.
    Modified { base: Arc<WeightSequence>, level: usize },
}

/// A weight sequence `w(1), w(2), ...` with `w(1) > 0`.
pub struct WeightSequence {
    kind: WeightKind,
    cache: LazyPrefix,
    pub declared_gamma: Option<f64>,
    pub declared_lambda: Option<f64>,
}

impl Clone for WeightSequence {
    fn clone(&self) -> Self {
        WeightSequence {
            kind: self.kind.clone(),
            cache: self.cache.duplicate(),
            declared_gamma: self.declared_gamma,
            declared_lambda: self.declared_lambda,
        }
    }
}

impl fmt::Debug for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSequence")
            .field("kind", &self.kind)
            .field("declared_gamma", &self.declared_gamma)
            .field("declared_lambda", &self.declared_lambda)
            .finish()
    }
}

impl WeightSequence {
    fn with_kind(kind: WeightKind, rng: Option<ChaCha8Rng>) -> Self {
        WeightSequence {
            kind,
            cache: LazyPrefix::new(rng),
            declared_gamma: None,
            declared_lambda: None,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::FirstWeightNotPositive(c));
        }
        let mut s = Self::with_kind(WeightKind::Constant(c), None);
        s.declared_gamma = Some(1.0);
        s.declared_lambda = Some(c);
        Ok(s)
    }

    /// Weights with `W(n) = lambda * n^gamma` exactly.
    pub fn power_law(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power law needs lambda, gamma > 0, got {lambda}, {gamma}"
            )));
        }
        let mut s = Self::with_kind(WeightKind::PowerLaw { lambda, gamma }, None);
        s.declared_gamma = Some(gamma);
        s.declared_lambda = Some(lambda);
        Ok(s)
    }

    /// `w(i) = scale * i^exponent`, so `W(n) ~ scale / (exponent + 1) * n^(exponent + 1)`.
    pub fn monomial(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale > 0.0) || !(exponent > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "monomial needs scale > 0 and exponent > -1, got {scale}, {exponent}"
            )));
        }
        let mut s = Self::with_kind(WeightKind::Monomial { scale, exponent }, None);
        s.declared_gamma = Some(exponent + 1.0);
        s.declared_lambda = Some(scale / (exponent + 1.0));
        Ok(s)
    }

    /// I.i.d. weights. A draw of zero at index 1 is redrawn so `w(1) > 0`.
    pub fn iid(law: IidLaw, seed: u64) -> Result<Self> {
        law.validate()?;
        let mut s = Self::with_kind(
            WeightKind::Iid { law, seed },
            Some(ChaCha8Rng::seed_from_u64(seed)),
        );
        s.declared_gamma = Some(1.0);
        s.declared_lambda = Some(law.mean());
        Ok(s)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(&w1) if w1 > 0.0 && w1.is_finite() => {}
            Some(&w1) => return Err(Error::FirstWeightNotPositive(w1)),
            None => return Err(Error::FirstWeightNotPositive(0.0)),
        }
        for (i, &w) in values.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidWeight { index: i + 1, value: w });
            }
        }
        Ok(Self::with_kind(WeightKind::Explicit(Arc::new(values)), None))
    }

    /// Loads one weight per line; blank lines and `#` comments are skipped.
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::explicit(read_float_lines(path)?)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Exposes whether every weight equals the first, which lets samplers
    /// pick uniformly instead of searching prefix sums.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, WeightKind::Constant(_))
    }

    /// `W(n)`; `W(0) = 0`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        match &self.kind {
            WeightKind::Constant(c) => c * n as f64,
            WeightKind::PowerLaw { lambda, gamma } => lambda * (n as f64).powf(*gamma),
            WeightKind::Modified { base, level } => {
                if n == 0 {
                    0.0
                } else {
                    base.partial_sum(n.max(*level))
                }
            }
            _ => self.prefix_sums(n)[n],
        }
    }

    /// `w(i) = W(i) - W(i - 1)` for `i >= 1`.
    pub fn w(&self, i: usize) -> f64 {
        assert!(i >= 1, "weights are indexed from 1");
        self.partial_sum(i) - self.partial_sum(i - 1)
    }

    /// `W(0..=n)`, shared with the cache when the kind is memoized.
    pub fn prefix_sums(&self, n: usize) -> Arc<Vec<f64>> {
        match &self.kind {
            WeightKind::Constant(_) | WeightKind::PowerLaw { .. } | WeightKind::Modified { .. } => {
                self.cache.get(n, |i, _, _| self.partial_sum(i))
            }
            WeightKind::Monomial { scale, exponent } => self
                .cache
                .get(n, |i, prev, _| prev[i - 1] + scale * (i as f64).powf(*exponent)),
            WeightKind::Iid { law, .. } => self.cache.get(n, |i, prev, rng| {
                let rng = rng.expect("iid weights carry an rng");
                let mut w = law.sample(rng);
                while i == 1 && !(w > 0.0) {
                    w = law.sample(rng);
                }
                prev[i - 1] + w
            }),
            WeightKind::Explicit(v) => self
                .cache
                .get(n, |i, prev, _| prev[i - 1] + v.get(i - 1).copied().unwrap_or(0.0)),
            WeightKind::PatDerived { fitness, .. } => {
                let mut fit_prefix = fitness.prefix_sums(n + 1);
                self.cache.get(n, |i, prev, rng| {
                    if i == 1 {
                        return 1.0;
                    }
                    let k = i - 1;
                    if fit_prefix.len() <= k + 1 {
                        fit_prefix = fitness.prefix_sums(2 * (k + 1));
                    }
                    let rng = rng.expect("pat weights carry an rng");
                    let shape_a = fit_prefix[k] + k as f64;
                    let shape_b = fit_prefix[k + 1] - fit_prefix[k];
                    prev[i - 1] / sample_beta(shape_a, shape_b, rng)
                })
            }
        }
    }

    /// `w(1..=n)` with a placeholder at index 0.
    pub fn values(&self, n: usize) -> Vec<f64> {
        let p = self.prefix_sums(n);
        let mut out = vec![0.0; n + 1];
        for i in 1..=n {
            out[i] = p[i] - p[i - 1];
        }
        out
    }
}

/// Beta(a, b) by the Gamma ratio; `b = 0` is the point mass at 1.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    let x = Gamma::new(a, 1.0).unwrap().sample(rng);
    let y = Gamma::new(b, 1.0).unwrap().sample(rng);
    // Both gammas underflowing only happens for tiny shapes.
    if x + y == 0.0 {
        return if rng.random::<f64>() < a / (a + b) { 1.0 } else { 0.0 };
    }
    x / (x + y)
}

/// `w^(N)`: `w(1) = W(N)`, zero on `2..=N`, unchanged afterwards.
pub fn modified_sequence(seq: &Arc<WeightSequence>, level: usize) -> Result<WeightSequence> {
    if level == 0 {
        return Err(Error::InvalidParameter("modification level must be >= 1".into()));
    }
    let mut s = WeightSequence::with_kind(
        WeightKind::Modified {
            base: Arc::clone(seq),
            level,
        },
        None,
    );
    s.declared_gamma = seq.declared_gamma;
    s.declared_lambda = seq.declared_lambda;
    Ok(s)
}

/// Random weights `W(1) = 1`, `W(n) = prod_{k < n} 1 / beta_k` with
/// `beta_k ~ Beta(A_k + k, a_{k+1})` independent.
pub fn pat_weights<R: Rng + ?Sized>(fit: &FitnessSequence, rng: &mut R) -> Result<WeightSequence> {
    // A_k + k >= k > 0 for every valid fitness sequence; a_1 enters A_k only.
    let a1 = fit.a(1);
    if !(a1 + 1.0 > 0.0) {
        return Err(Error::BetaParameter { k: 1, value: a1 + 1.0 });
    }
    let seed = rng.random::<u64>();
    let mut s = WeightSequence::with_kind(
        WeightKind::PatDerived {
            fitness: fit.clone(),
            seed,
        },
        Some(ChaCha8Rng::seed_from_u64(seed)),
    );
    s.declared_gamma = fit.declared_zeta.map(|z| z / (z + 1.0));
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionThresholds {
    /// Allowed relative rise of a residual over the running maximum.
    pub h1_noise: f64,
    /// Residuals below this are treated as exact.
    pub h1_floor: f64,
    /// `n T(n)` must stay below this multiple of its median.
    pub h2_ratio: f64,
}

impl Default for AssumptionThresholds {
    fn default() -> Self {
        AssumptionThresholds {
            h1_noise: 0.2,
            h1_floor: 1e-9,
            h2_ratio: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub w_n: f64,
    /// `|W(n) - lambda_hat n^gamma_hat| / n^gamma_hat`.
    pub residual: f64,
    /// `n * sum_{i=n}^{n_max} (w_i / W_i)^2`.
    pub n_times_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub n_max: usize,
    pub gamma_hat: f64,
    pub lambda_hat: f64,
    pub rows: Vec<ReportRow>,
    pub h1: Option<Verdict>,
    pub h2: Option<Verdict>,
}

impl AssumptionReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,W_n,residual,n_times_tail")?;
        for r in &self.rows {
            writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.n, r.w_n, r.residual, r.n_times_tail)?;
        }
        Ok(())
    }
}

fn geometric_grid(n_max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = 16;
    while n < n_max {
        grid.push(n);
        n *= 2;
    }
    grid.push(n_max);
    grid
}

fn build_report(seq: &WeightSequence, n_max: usize) -> Result<AssumptionReport> {
    if n_max < 100 {
        return Err(Error::RangeTooShort(n_max));
    }
    let prefix = seq.prefix_sums(n_max);

    let lo = (n_max / 2).max(1);
    let xs: Vec<f64> = (lo..=n_max).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = (lo..=n_max).map(|n| prefix[n].ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let gamma_hat = fit.slope;
    let lambda_hat = fit.intercept.exp();

    // Tail sums from the top down.
    let mut tail = vec![0.0; n_max + 2];
    for i in (1..=n_max).rev() {
        let ratio = (prefix[i] - prefix[i - 1]) / prefix[i];
        tail[i] = tail[i + 1] + ratio * ratio;
    }

    let rows = geometric_grid(n_max)
        .into_iter()
        .map(|n| {
            let scale = (n as f64).powf(gamma_hat);
            ReportRow {
                n,
                w_n: prefix[n],
                residual: (prefix[n] - lambda_hat * scale).abs() / scale,
                n_times_tail: n as f64 * tail[n],
            }
        })
        .collect();

    Ok(AssumptionReport {
        n_max,
        gamma_hat,
        lambda_hat,
        rows,
        h1: None,
        h2: None,
    })
}

fn h1_verdict(report: &AssumptionReport, th: &AssumptionThresholds) -> Verdict {
    let res: Vec<f64> = report.rows.iter().map(|r| r.residual).collect();
    let mut running = res[0];
    let mut worst = 1.0_f64;
    let mut pass = true;
    for &r in &res[1..] {
        if r > th.h1_floor && r > (1.0 + th.h1_noise) * running {
            pass = false;
            worst = worst.max(r / running);
        }
        running = running.max(r);
    }
    let (first, last) = (res[0], *res.last().unwrap());
    if last > th.h1_floor && last >= first {
        pass = false;
    }
    Verdict {
        pass,
        detail: format!(
            "gamma_hat={:.6} lambda_hat={:.6} residual first={first:.3e} last={last:.3e} worst_rise={worst:.3} noise={} floor={:e}",
            report.gamma_hat, report.lambda_hat, th.h1_noise, th.h1_floor
        ),
    }
}

fn h2_verdict(report: &AssumptionReport, th: &AssumptionThresholds) -> Verdict {
    let mut vals: Vec<f64> = report.rows.iter().map(|r| r.n_times_tail).collect();
    let max = vals.iter().cloned().fold(0.0_f64, f64::max);
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = crate::stats::quantile_sorted(&vals, 0.5);
    Verdict {
        pass: max <= th.h2_ratio * median,
        detail: format!("max n*T(n)={max:.4} median={median:.4} ratio_cap={}", th.h2_ratio),
    }
}

/// Fits `(gamma, lambda)` on the upper half of `1..=n_max` and checks that
/// the relative residuals decay along a doubling grid.
pub fn check_h1(seq: &WeightSequence, n_max: usize) -> Result<AssumptionReport> {
    check_h1_with(seq, n_max, &AssumptionThresholds::default())
}

pub fn check_h1_with(
    seq: &WeightSequence,
    n_max: usize,
    th: &AssumptionThresholds,
) -> Result<AssumptionReport> {
    let mut report = build_report(seq, n_max)?;
    report.h1 = Some(h1_verdict(&report, th));
    Ok(report)
}

/// Truncated tails `sum_{i=n}^{n_max} (w_i/W_i)^2` scaled by `n`.
pub fn check_h2(seq: &WeightSequence, n_max: usize) -> Result<AssumptionReport> {
    check_h2_with(seq, n_max, &AssumptionThresholds::default())
}

pub fn check_h2_with(
    seq: &WeightSequence,
    n_max: usize,
    th: &AssumptionThresholds,
) -> Result<AssumptionReport> {
    let mut report = build_report(seq, n_max)?;
    report.h2 = Some(h2_verdict(&report, th));
    Ok(report)
}

pub fn check_assumptions(
    seq: &WeightSequence,
    n_max: usize,
    th: &AssumptionThresholds,
) -> Result<AssumptionReport> {
    let mut report = build_report(seq, n_max)?;
    report.h1 = Some(h1_verdict(&report, th));
    report.h2 = Some(h2_verdict(&report, th));
    Ok(report)
}

fn split_seed(s: &str) -> Result<(&str, u64)> {
    let (law, seed) = s
        .rsplit_once(':')
        .ok_or_else(|| Error::InvalidParameter(format!("`{s}` needs a trailing :SEED")))?;
    let seed = seed
        .parse::<u64>()
        .map_err(|e| Error::InvalidParameter(format!("seed in `{s}`: {e}")))?;
    Ok((law, seed))
}

fn read_float_lines<P: AsRef<Path>>(path: P) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line.parse::<f64>().map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Parses `constant:C`, `power:LAMBDA:GAMMA`, `monomial:SCALE:EXP`,
/// `iid:<law>:SEED` or `explicit:PATH`.
pub fn parse_weight_spec(spec: &str) -> Result<WeightSequence> {
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::InvalidParameter(format!("weights `{spec}`: {e}")))
    };
    if let Some(rest) = spec.strip_prefix("constant:") {
        WeightSequence::constant(num(rest)?)
    } else if let Some(rest) = spec.strip_prefix("power:") {
        let (a, b) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("`{spec}` needs LAMBDA:GAMMA")))?;
        WeightSequence::power_law(num(a)?, num(b)?)
    } else if let Some(rest) = spec.strip_prefix("monomial:") {
        let (a, b) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("`{spec}` needs SCALE:EXP")))?;
        WeightSequence::monomial(num(a)?, num(b)?)
    } else if let Some(rest) = spec.strip_prefix("iid:") {
        let (law, seed) = split_seed(rest)?;
        WeightSequence::iid(IidLaw::parse(law)?, seed)
    } else if let Some(path) = spec.strip_prefix("explicit:") {
        WeightSequence::from_file(path)
    } else {
        Err(Error::InvalidParameter(format!("unknown weight spec `{spec}`")))
    }
}
