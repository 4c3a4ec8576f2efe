//! Renewal functions of the strict ascending ladder heights of the walks
//! with jumps `Poisson(1) - 1` and `1 - Poisson(1)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use super::pmf::{poisson_pmf, DiscreteSampler};
use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::stats::{linear_fit, mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Jumps `Poisson(1) - 1`.
    Ascending,
    /// Jumps `1 - Poisson(1)`.
    Descending,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ascending => "ascending",
            Direction::Descending => "descending",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" => Ok(Direction::Ascending),
            "descending" => Ok(Direction::Descending),
            other => Err(Error::InvalidParameter(format!("unknown direction `{other}`"))),
        }
    }
}

/// Poisson(1) - 1 jump sampler with a sign.
#[derive(Debug, Clone)]
pub struct PoissonJumps {
    sampler: DiscreteSampler,
    sign: i64,
}

impl PoissonJumps {
    pub fn new(direction: Direction) -> Self {
        PoissonJumps {
            sampler: DiscreteSampler::new(&poisson_pmf(1.0)),
            sign: match direction {
                Direction::Ascending => 1,
                Direction::Descending => -1,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.sign * (self.sampler.sample(rng) as i64 - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    pub direction: Direction,
    /// `R(x)` for `x = 0..=x_max`.
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub rho: f64,
    pub rho_stderr: f64,
    pub sample_count: usize,
    /// Samples stopped by the step cap before the walk passed `x_max`.
    pub censored: usize,
}

impl RenewalTable {
    pub fn r(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Closed forms. The descending walk is skip-free upwards, so every
    /// level is a ladder height and `R^-(x) = x + 1`. The ascending walk is
    /// skip-free downwards with mean 0, so its ladder height law is
    /// `g(h) = e P(Poisson(1) >= h + 1)` with mean `e / 2`.
    pub fn exact(direction: Direction, x_max: usize) -> Self {
        let (values, rho) = match direction {
            Direction::Descending => ((0..=x_max).map(|x| x as f64 + 1.0).collect(), 1.0),
            Direction::Ascending => {
                let pmf = poisson_pmf(1.0);
                let tail = |h: usize| pmf.iter().skip(h + 1).sum::<f64>();
                let g: Vec<f64> = (0..=x_max).map(|h| if h == 0 { 0.0 } else { std::f64::consts::E * tail(h) }).collect();
                let mut r = vec![1.0; x_max + 1];
                for x in 1..=x_max {
                    r[x] = 1.0 + (1..=x).map(|h| g[h] * r[x - h]).sum::<f64>();
                }
                (r, 2.0 / std::f64::consts::E)
            }
        };
        RenewalTable {
            direction,
            stderr: vec![0.0; values.len()],
            values,
            rho,
            rho_stderr: 0.0,
            sample_count: 0,
            censored: 0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# direction={},rho={},rho_stderr={},sample_count={},censored={}",
            self.direction, self.rho, self.rho_stderr, self.sample_count, self.censored
        )?;
        writeln!(out, "x,R,stderr")?;
        for (x, (v, s)) in self.values.iter().zip(&self.stderr).enumerate() {
            writeln!(out, "{x},{v},{s}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut table = RenewalTable {
            direction: Direction::Ascending,
            values: Vec::new(),
            stderr: Vec::new(),
            rho: f64::NAN,
            rho_stderr: f64::NAN,
            sample_count: 0,
            censored: 0,
        };
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let perr = |msg: String| Error::Parse { line: lineno, msg };
            let line = line.trim();
            if line.is_empty() || line == "x,R,stderr" {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.trim().split(',') {
                    let (k, v) = kv.split_once('=').ok_or_else(|| perr(format!("bad header field `{kv}`")))?;
                    let num = || v.parse::<f64>().map_err(|e| perr(format!("{k}: {e}")));
                    match k.trim() {
                        "direction" => table.direction = v.parse()?,
                        "rho" => table.rho = num()?,
                        "rho_stderr" => table.rho_stderr = num()?,
                        "sample_count" => table.sample_count = num()? as usize,
                        "censored" => table.censored = num()? as usize,
                        other => return Err(perr(format!("unknown header key `{other}`"))),
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(perr("expected x,R,stderr".into()));
            }
            let x: usize = fields[0].parse().map_err(|e| perr(format!("x: {e}")))?;
            if x != table.values.len() {
                return Err(perr(format!("expected x = {}", table.values.len())));
            }
            table.values.push(fields[1].parse().map_err(|e| perr(format!("R: {e}")))?);
            table.stderr.push(fields[2].parse().map_err(|e| perr(format!("stderr: {e}")))?);
        }
        Ok(table)
    }
}

/// Simulates the walk until it first exceeds `x_max` (or `step_cap` steps),
/// counting the ladder heights at most `x` for each `x`, `H_0 = 0` included.
/// `rho` is the least-squares slope of `R` over the top half of `0..=x_max`.
///
/// A censored sample can miss at most `x + 1` ladder heights below `x`;
/// the bias of `R(x)` is at most `(x + 1) * censored / samples`.
pub fn renewal_estimate(direction: Direction, x_max: usize, samples: usize, step_cap: u64, seed: u64) -> Result<RenewalTable> {
    if x_max < 1 {
        return Err(Error::InvalidParameter("x_max must be at least 1".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let jumps = PoissonJumps::new(direction);
    let runs: Vec<(Vec<u32>, bool)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, x_max as u64, i as u64);
            let mut counts = vec![0u32; x_max + 1];
            let mut ladders = vec![0i64];
            let (mut s, mut max, mut steps) = (0i64, 0i64, 0u64);
            while max <= x_max as i64 && steps < step_cap {
                s += jumps.sample(&mut rng);
                steps += 1;
                if s > max {
                    max = s;
                    ladders.push(s);
                }
            }
            for h in ladders {
                if h <= x_max as i64 {
                    for c in counts.iter_mut().skip(h as usize) {
                        *c += 1;
                    }
                }
            }
            (counts, max <= x_max as i64)
        })
        .collect();
    let censored = runs.iter().filter(|(_, c)| *c).count();
    let mut values = Vec::with_capacity(x_max + 1);
    let mut stderr = Vec::with_capacity(x_max + 1);
    for x in 0..=x_max {
        let col: Vec<f64> = runs.iter().map(|(c, _)| c[x] as f64).collect();
        values.push(mean(&col));
        stderr.push((variance(&col) / samples as f64).sqrt());
    }
    let lo = x_max / 2;
    let xs: Vec<f64> = (lo..=x_max).map(|x| x as f64).collect();
    let fit = linear_fit(&xs, &values[lo..]);
    Ok(RenewalTable {
        direction,
        values,
        stderr,
        rho: fit.slope,
        rho_stderr: if fit.slope_stderr.is_nan() { 0.0 } else { fit.slope_stderr },
        sample_count: samples,
        censored,
    })
}

/// Long-run estimate of `rho = 1 / E[H_1]` from `epochs` ladder epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderConstant {
    pub rho: f64,
    pub rho_stderr: f64,
    pub epochs: usize,
    pub censored: usize,
}

/// Epochs longer than `epoch_cap` steps are dropped and counted as censored.
pub fn ladder_constant(direction: Direction, epochs: usize, epoch_cap: u64, seed: u64) -> LadderConstant {
    let jumps = PoissonJumps::new(direction);
    let chunk = 10_000usize;
    let chunks = epochs.div_ceil(chunk);
    let parts: Vec<(f64, f64, usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replica_rng(seed, u64::MAX - 1, c as u64);
            let todo = chunk.min(epochs - c * chunk);
            let (mut sum, mut sq, mut kept, mut cens) = (0.0, 0.0, 0usize, 0usize);
            for _ in 0..todo {
                let (mut s, mut steps) = (0i64, 0u64);
                while s <= 0 && steps < epoch_cap {
                    s += jumps.sample(&mut rng);
                    steps += 1;
                }
                if s > 0 {
                    sum += s as f64;
                    sq += (s * s) as f64;
                    kept += 1;
                } else {
                    cens += 1;
                }
            }
            (sum, sq, kept, cens)
        })
        .collect();
    let (sum, sq, kept, censored) = parts
        .iter()
        .fold((0.0, 0.0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));
    let m = sum / kept as f64;
    let var = (sq / kept as f64 - m * m).max(0.0);
    let se_mean = (var / kept as f64).sqrt();
    LadderConstant {
        rho: 1.0 / m,
        rho_stderr: se_mean / (m * m),
        epochs,
        censored,
    }
}

/// Ladder constants simulated once and kept as regression values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedConstants {
    pub rho: f64,
    pub rho_stderr: f64,
    pub rho_minus: f64,
    pub rho_minus_stderr: f64,
}

pub const RENEWAL_CONSTANTS_CSV: &str = include_str!("../../data/renewal_constants.csv");

pub fn cached_constants() -> Result<CachedConstants> {
    let mut out = CachedConstants {
        rho: f64::NAN,
        rho_stderr: f64::NAN,
        rho_minus: f64::NAN,
        rho_minus_stderr: f64::NAN,
    };
    for (idx, line) in RENEWAL_CONSTANTS_CSV.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("name,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let perr = |msg: &str| Error::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        if f.len() < 3 {
            return Err(perr("expected name,value,stderr,..."));
        }
        let v: f64 = f[1].parse().map_err(|_| perr("bad value"))?;
        let s: f64 = f[2].parse().map_err(|_| perr("bad stderr"))?;
        match f[0] {
            "rho" => (out.rho, out.rho_stderr) = (v, s),
            "rho_minus" => (out.rho_minus, out.rho_minus_stderr) = (v, s),
            _ => return Err(perr("unknown constant")),
        }
    }
    Ok(out)
}
