//! Monte Carlo campaigns: height expansion, height tail, diameter, the
//! barrier-weighted quantity `Q_n^(N)` and PAT against WRT with PAT-derived
//! weights.
//!
//! Replica `r` at size `n` always draws from `replica_rng(seed, n, r)`, and
//! parallel maps keep replica order, so output does not depend on the
//! number of worker threads.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::rw::walk::TimeChange;
use crate::rw::{time_change, Direction, RenewalTable};
use crate::stats::{chi_square_two_sample, ks_two_sample, linear_fit, mean, quantile_sorted, variance, ChiSquareResult, KsResult, LinearFit};
use crate::theta::{solve_theta, x_n, AsymptoticConstants};
use crate::tilt::tilt_params;
use crate::tree::{enumerate_wrt, grow_pat, grow_wrt, wrt_height, Tree};
use crate::weights::{check_h1, modified_sequence, parse_weight_spec, pat_weights, FitnessSequence, WeightSequence};

/// Centered statistics are only computed from this size on.
pub const MIN_N: usize = 8;

/// Exceedance counts below this are left out of the tail fit.
pub const TAIL_FIT_MIN_COUNT: u64 = 10;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Height,
    Tail,
    Diameter,
    Qn,
    PatWrt,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Height => "height",
            ExperimentKind::Tail => "tail",
            ExperimentKind::Diameter => "diameter",
            ExperimentKind::Qn => "qn",
            ExperimentKind::PatWrt => "pat-wrt",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "height" => ExperimentKind::Height,
            "tail" => ExperimentKind::Tail,
            "diameter" => ExperimentKind::Diameter,
            "qn" => ExperimentKind::Qn,
            "pat-wrt" => ExperimentKind::PatWrt,
            other => return Err(Error::InvalidParameter(format!("unknown experiment `{other}`"))),
        })
    }
}

/// Campaign description, read from `key = value` lines.
///
/// Keys: `experiment`, `weights`, `fitness`, `gamma`, `n` (comma list),
/// `log2_n` (range `A..B`), `replicas`, `seed`, `x` (list or range), `K`,
/// `N`, `t`, `out`. Lines starting with `#` are comments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub weights: String,
    pub fitness: String,
    pub gamma: Option<f64>,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub x_grid: Vec<i64>,
    pub barrier_k: u32,
    pub collapse_level: usize,
    pub t: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Height,
            weights: "constant:1".into(),
            fitness: "constant:1".into(),
            gamma: None,
            n_grid: vec![1024],
            replicas: 100,
            seed: 1,
            x_grid: (1..=8).collect(),
            barrier_k: 5,
            collapse_level: 10,
            t: 20,
            out: None,
        }
    }
}

fn parse_range_or_list<T>(value: &str, line: usize) -> Result<Vec<T>>
where
    T: FromStr + Copy + PartialOrd + std::ops::Add<Output = T> + From<u8>,
    T::Err: fmt::Display,
{
    let perr = |msg: String| Error::Parse { line, msg };
    let one = |s: &str| s.trim().parse::<T>().map_err(|e| perr(format!("`{s}`: {e}")));
    if let Some((a, b)) = value.split_once("..") {
        let (a, b) = (one(a)?, one(b)?);
        let mut out = Vec::new();
        let mut v = a;
        while v <= b {
            out.push(v);
            v = v + T::from(1u8);
        }
        Ok(out)
    } else {
        value.split(',').map(one).collect()
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line, msg };
            let (key, value) = s.split_once('=').ok_or_else(|| perr(format!("expected key = value, got `{s}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num_err = |e: &dyn fmt::Display| perr(format!("{key}: {e}"));
            match key {
                "experiment" => cfg.experiment = value.parse().map_err(|e: Error| num_err(&e))?,
                "weights" => cfg.weights = value.to_string(),
                "fitness" => cfg.fitness = value.to_string(),
                "gamma" => cfg.gamma = Some(value.parse().map_err(|e| num_err(&e))?),
                "n" => cfg.n_grid = parse_range_or_list::<usize>(value, line)?,
                "log2_n" => {
                    let exps = parse_range_or_list::<u32>(value, line)?;
                    if exps.iter().any(|&e| e >= usize::BITS) {
                        return Err(perr("log2_n too large".into()));
                    }
                    cfg.n_grid = exps.into_iter().map(|e| 1usize << e).collect();
                }
                "replicas" => cfg.replicas = value.parse().map_err(|e| num_err(&e))?,
                "seed" => cfg.seed = value.parse().map_err(|e| num_err(&e))?,
                "x" => cfg.x_grid = parse_range_or_list::<i64>(value, line)?,
                "K" => cfg.barrier_k = value.parse().map_err(|e| num_err(&e))?,
                "N" => cfg.collapse_level = value.parse().map_err(|e| num_err(&e))?,
                "t" => cfg.t = value.parse().map_err(|e| num_err(&e))?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                other => return Err(perr(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("n grid must be non-empty and strictly ascending".into()));
        }
        if self.experiment != ExperimentKind::PatWrt && self.experiment != ExperimentKind::Qn && self.n_grid[0] < MIN_N {
            return Err(Error::InvalidParameter(format!("centered statistics need n >= {MIN_N}")));
        }
        Ok(())
    }

    pub fn weight_sequence(&self) -> Result<WeightSequence> {
        parse_weight_spec(&self.weights)
    }

    pub fn fitness_sequence(&self) -> Result<FitnessSequence> {
        FitnessSequence::parse(&self.fitness)
    }

    /// `gamma` from the config, else declared by the sequence, else fitted.
    pub fn constants(&self, seq: &WeightSequence) -> Result<AsymptoticConstants> {
        let gamma = match (self.gamma, seq.declared_gamma) {
            (Some(g), _) => g,
            (None, Some(g)) => g,
            (None, None) => check_h1(seq, (*self.n_grid.last().unwrap()).max(1024))?.gamma_hat,
        };
        solve_theta(gamma)
    }
}

/// One line of campaign output.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub n: usize,
    pub replica_count: usize,
    pub stat_name: String,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
}

impl CsvRow {
    fn new(experiment: &str, n: usize, replica_count: usize, stat_name: &str, value: f64, ci: Option<(f64, f64)>) -> Self {
        CsvRow {
            experiment: experiment.to_string(),
            n,
            replica_count,
            stat_name: stat_name.to_string(),
            value,
            ci,
        }
    }
}

pub const CSV_HEADER: &str = "experiment,n,replica_count,stat_name,value,ci_low,ci_high";

pub fn write_csv<W: Write>(rows: &[CsvRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let (lo, hi) = match r.ci {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment, r.n, r.replica_count, r.stat_name, r.value, lo, hi
        )?;
    }
    Ok(())
}

/// Distribution summary of one statistic at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_ci_half: f64,
    /// Quantiles at 1%, 10%, 50%, 90% and 99%.
    pub quantiles: [f64; 5],
    /// Distribution-free 95% intervals for the same quantiles.
    pub quantile_ci: [(f64, f64); 5],
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.01, 0.10, 0.50, 0.90, 0.99];

/// Order-statistic interval for the `q` quantile of sorted data.
pub fn quantile_interval(sorted: &[f64], q: f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let half = Z95 * (n * q * (1.0 - q)).sqrt();
    let lo = ((n * q - half).floor().max(0.0) as usize).min(sorted.len() - 1);
    let hi = ((n * q + half).ceil().max(0.0) as usize).min(sorted.len() - 1);
    (sorted[lo], sorted[hi])
}

impl SummaryRow {
    pub fn from_values(n: usize, values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let var = variance(values);
        SummaryRow {
            n,
            replicas: values.len(),
            mean: mean(values),
            variance: var,
            mean_ci_half: Z95 * (var / values.len() as f64).sqrt(),
            quantiles: QUANTILE_LEVELS.map(|q| quantile_sorted(&sorted, q)),
            quantile_ci: QUANTILE_LEVELS.map(|q| quantile_interval(&sorted, q)),
        }
    }

    /// Width of the (1%, 99%) range.
    pub fn spread(&self) -> f64 {
        self.quantiles[4] - self.quantiles[0]
    }

    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }

    fn csv_rows(&self, experiment: &str, stat: &str) -> Vec<CsvRow> {
        let (n, r) = (self.n, self.replicas);
        let mut rows = vec![
            CsvRow::new(experiment, n, r, &format!("{stat}_mean"), self.mean, Some((self.mean - self.mean_ci_half, self.mean + self.mean_ci_half))),
            CsvRow::new(experiment, n, r, &format!("{stat}_variance"), self.variance, None),
        ];
        for ((q, v), ci) in QUANTILE_LEVELS.iter().zip(self.quantiles).zip(self.quantile_ci) {
            rows.push(CsvRow::new(experiment, n, r, &format!("{stat}_q{:02}", (q * 100.0).round() as u32), v, Some(ci)));
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub stat_name: String,
    pub rows: Vec<SummaryRow>,
}

/// Spread of the centered statistic across the `n` grid and the drift of
/// its median between the two largest sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tightness {
    pub max_spread: f64,
    pub spread_variation: f64,
    pub median_drift: f64,
}

impl SummaryStats {
    pub fn tightness(&self) -> Tightness {
        let spreads: Vec<f64> = self.rows.iter().map(SummaryRow::spread).collect();
        let max = spreads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = spreads.iter().cloned().fold(f64::INFINITY, f64::min);
        let k = self.rows.len();
        let drift = if k >= 2 {
            (self.rows[k - 1].median() - self.rows[k - 2].median()).abs()
        } else {
            0.0
        };
        Tightness {
            max_spread: max,
            spread_variation: max - min,
            median_drift: drift,
        }
    }

    /// `|median(n_b) - median(n_a)|` when both sizes are on the grid.
    pub fn median_drift_between(&self, n_a: usize, n_b: usize) -> Option<f64> {
        let get = |n| self.rows.iter().find(|r| r.n == n).map(SummaryRow::median);
        Some((get(n_b)? - get(n_a)?).abs())
    }

    fn csv_rows(&self, experiment: &str) -> Vec<CsvRow> {
        self.rows.iter().flat_map(|r| r.csv_rows(experiment, &self.stat_name)).collect()
    }
}

/// Heights of `replicas` independent WRT trees of size `n`.
pub fn height_samples(seq: &WeightSequence, n: usize, replicas: usize, seed: u64) -> Vec<u32> {
    seq.prefix_sums(n);
    (0..replicas)
        .into_par_iter()
        .map_init(Vec::new, |scratch, r| {
            let mut rng = replica_rng(seed, n as u64, r as u64);
            wrt_height(seq, n, scratch, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightExpansion {
    pub constants: AsymptoticConstants,
    /// `h(T_n) - speed log n + logcorr log log n` per `n`.
    pub centered: SummaryStats,
    /// Mean raw height per `n`.
    pub mean_height: Vec<(usize, f64)>,
    /// Mean height against `log n`.
    pub slope_fit: LinearFit,
    /// Mean height plus `logcorr log log n` against `log n`.
    pub corrected_slope_fit: LinearFit,
}

impl HeightExpansion {
    /// Fitted first-order slope over `gamma e^theta`.
    pub fn slope_ratio(&self) -> f64 {
        self.slope_fit.slope / self.constants.speed
    }

    pub fn corrected_slope_ratio(&self) -> f64 {
        self.corrected_slope_fit.slope / self.constants.speed
    }
}

pub fn height_expansion(cfg: &ExperimentConfig) -> Result<HeightExpansion> {
    cfg.validate()?;
    let seq = cfg.weight_sequence()?;
    let c = cfg.constants(&seq)?;
    let mut rows = Vec::new();
    let mut mean_height = Vec::new();
    for &n in &cfg.n_grid {
        let hs = height_samples(&seq, n, cfg.replicas, cfg.seed);
        let center = c.height_centering(n as f64);
        let centered: Vec<f64> = hs.iter().map(|&h| h as f64 - center).collect();
        mean_height.push((n, hs.iter().map(|&h| h as f64).sum::<f64>() / hs.len() as f64));
        rows.push(SummaryRow::from_values(n, &centered));
    }
    let (slope_fit, corrected_slope_fit) = first_order_fits(&c, &mean_height);
    Ok(HeightExpansion {
        constants: c,
        centered: SummaryStats {
            stat_name: "centered_height".into(),
            rows,
        },
        mean_height,
        slope_fit,
        corrected_slope_fit,
    })
}

fn first_order_fits(c: &AsymptoticConstants, means: &[(usize, f64)]) -> (LinearFit, LinearFit) {
    let xs: Vec<f64> = means.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = means.iter().map(|&(_, m)| m).collect();
    let yc: Vec<f64> = means.iter().map(|&(n, m)| m + c.logcorr * (n as f64).ln().ln()).collect();
    if xs.len() < 2 {
        let nan = LinearFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            slope_stderr: f64::NAN,
        };
        return (nan, nan);
    }
    (linear_fit(&xs, &ys), linear_fit(&xs, &yc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub x: i64,
    pub exceedances: u64,
    pub probability: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    pub n: usize,
    pub replicas: usize,
    pub constants: AsymptoticConstants,
    pub rows: Vec<TailRow>,
    /// Least squares of `log p` on `x` over rows with at least
    /// [`TAIL_FIT_MIN_COUNT`] exceedances; `None` with fewer than two.
    pub fit: Option<LinearFit>,
}

impl TailTable {
    /// The slope must be at most `-theta + slack`.
    pub fn slope_within(&self, slack: f64) -> bool {
        self.fit.is_some_and(|f| f.slope <= -self.constants.theta + slack)
    }
}

/// Tail of the height at the largest `n` of the grid, relative to the
/// centering: `P(h(T_n) >= speed log n - logcorr log log n + x)`.
pub fn tail_bound(cfg: &ExperimentConfig) -> Result<TailTable> {
    cfg.validate()?;
    let seq = cfg.weight_sequence()?;
    let c = cfg.constants(&seq)?;
    let n = *cfg.n_grid.last().unwrap();
    let hs = height_samples(&seq, n, cfg.replicas, cfg.seed);
    tail_table(&hs, n, c, &cfg.x_grid)
}

pub fn tail_table(heights: &[u32], n: usize, c: AsymptoticConstants, x_grid: &[i64]) -> Result<TailTable> {
    let center = c.height_centering(n as f64);
    let total = heights.len() as u64;
    let rows: Vec<TailRow> = x_grid
        .iter()
        .map(|&x| {
            let thr = center + x as f64;
            let k = heights.iter().filter(|&&h| h as f64 >= thr).count() as u64;
            TailRow {
                x,
                exceedances: k,
                probability: k as f64 / total as f64,
                ci: crate::stats::wilson_interval(k, total, Z95),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.exceedances >= TAIL_FIT_MIN_COUNT)
        .map(|r| (r.x as f64, r.probability.ln()))
        .collect();
    let fit = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&xs, &ys)
    });
    Ok(TailTable {
        n,
        replicas: heights.len(),
        constants: c,
        rows,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterReport {
    pub constants: AsymptoticConstants,
    /// `diam - 2 speed log n + 2 logcorr log log n`.
    pub centered_diameter: SummaryStats,
    /// `2 h - 2 speed log n + 2 logcorr log log n`.
    pub centered_twice_height: SummaryStats,
    /// Replicas with `diam > 2 h`; must be zero.
    pub violations: usize,
    pub total: usize,
}

pub fn diameter_vs_height(cfg: &ExperimentConfig) -> Result<DiameterReport> {
    cfg.validate()?;
    let seq = cfg.weight_sequence()?;
    let c = cfg.constants(&seq)?;
    let mut drows = Vec::new();
    let mut hrows = Vec::new();
    let mut violations = 0;
    let mut total = 0;
    for &n in &cfg.n_grid {
        seq.prefix_sums(n);
        let pairs: Vec<(u32, u32)> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(cfg.seed, n as u64, r as u64);
                let t = grow_wrt(&seq, n, &mut rng);
                (t.diameter(), t.height())
            })
            .collect();
        let center = c.diameter_centering(n as f64);
        violations += pairs.iter().filter(|(d, h)| *d > 2 * *h).count();
        total += pairs.len();
        let d: Vec<f64> = pairs.iter().map(|&(d, _)| d as f64 - center).collect();
        let h: Vec<f64> = pairs.iter().map(|&(_, h)| 2.0 * h as f64 - center).collect();
        drows.push(SummaryRow::from_values(n, &d));
        hrows.push(SummaryRow::from_values(n, &h));
    }
    Ok(DiameterReport {
        constants: c,
        centered_diameter: SummaryStats {
            stat_name: "centered_diameter".into(),
            rows: drows,
        },
        centered_twice_height: SummaryStats {
            stat_name: "centered_twice_height".into(),
            rows: hrows,
        },
        violations,
        total,
    })
}

/// Largest `n * (t + 1)` checkpoint table kept in memory.
pub const QN_MEMORY_CAP: usize = 1 << 28;
pub const QN_MAX_T: usize = 60;

/// Deterministic ingredients of `Q_n^(N)`: the collapsed weights, the
/// checkpoints `i_k^(N)`, `n = i_t^(N)`, `x_n` and `log Z_n^(N)`.
#[derive(Debug, Clone)]
pub struct QnSetup {
    pub base: Arc<WeightSequence>,
    pub modified: WeightSequence,
    pub theta: f64,
    pub collapse_level: usize,
    pub barrier_k: u32,
    pub t: usize,
    pub checkpoints: TimeChange,
    pub n: usize,
    pub x_n: i64,
    pub log_z: f64,
}

impl QnSetup {
    pub fn new(base: Arc<WeightSequence>, theta: f64, collapse_level: usize, barrier_k: u32, t: usize) -> Result<Self> {
        if t == 0 || t > QN_MAX_T {
            return Err(Error::InvalidParameter(format!("t must lie in 1..={QN_MAX_T}")));
        }
        let modified = modified_sequence(&base, collapse_level)?;
        let mut len = 1024usize.max(2 * collapse_level);
        let (params, checkpoints) = loop {
            let params = tilt_params(&modified, theta, len)?;
            let p: Vec<f64> = (0..=len).map(|i| if i >= 1 { params.p(i) } else { 0.0 }).collect();
            match time_change(&p, t) {
                Ok(tc) => break (params, tc),
                Err(Error::TimeChangeUnreachable { .. }) if len < QN_MEMORY_CAP => len *= 4,
                Err(e) => return Err(e),
            }
        };
        let n = checkpoints.i[t];
        if n.saturating_mul(t + 1) > QN_MEMORY_CAP {
            return Err(Error::InvalidParameter(format!("checkpoint table {n} x {} exceeds the memory cap", t + 1)));
        }
        let xn = x_n(theta, n as u128)?;
        if xn < 0 || (t as i64) < xn {
            return Err(Error::BarrierTooShort { t, x_n: xn });
        }
        Ok(QnSetup {
            log_z: params.log_z(n),
            base,
            modified,
            theta,
            collapse_level,
            barrier_k,
            t,
            checkpoints,
            n,
            x_n: xn,
        })
    }

    /// `sqrt(2/pi) K / rho^-`.
    pub fn first_moment_constant(&self, rho_minus: f64) -> f64 {
        (2.0 / std::f64::consts::PI).sqrt() * self.barrier_k as f64 / rho_minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnSample {
    /// `log Q`, `-inf` when no vertex qualifies.
    pub log_q: f64,
    pub qualifying: usize,
    pub height_full: u32,
    pub height_collapsed: u32,
}

impl QnSample {
    pub fn q(&self) -> f64 {
        self.log_q.exp()
    }
}

/// Grows `T_n` from the base weights, collapses labels `2..=N` onto the
/// root and evaluates `Q_n^(N)` on the collapsed tree. Each vertex inherits
/// its parent's checkpoint heights and overwrites the checkpoints it is
/// itself present at.
pub fn qn_sample<R: rand::Rng + ?Sized>(setup: &QnSetup, rng: &mut R) -> Result<QnSample> {
    let full = grow_wrt(&setup.base, setup.n, rng);
    let tree = full.collapse(setup.collapse_level)?;
    Ok(qn_on_tree(setup, &full, &tree))
}

/// `Q_n^(N)` for an already collapsed tree; `full` only supplies the
/// uncollapsed height for the dominance check.
pub fn qn_on_tree(setup: &QnSetup, full: &Tree, tree: &Tree) -> QnSample {
    let (n, t) = (setup.n, setup.t);
    let ck = &setup.checkpoints.i;
    let width = t + 1;
    let mut table = vec![0u32; (n + 1) * width];
    let prefix = setup.modified.prefix_sums(n);
    let target = t as i64 - setup.x_n;
    let half = t as f64 / 2.0;
    let mut sum = 0.0;
    let mut qualifying = 0;
    for m in 1..=n {
        let h = tree.vertex_height(m);
        let parent = tree.parent(m);
        for k in 0..=t {
            table[m * width + k] = if ck[k] >= m { h } else { table[parent * width + k] };
        }
        if h as i64 != target {
            continue;
        }
        let row = &table[m * width..(m + 1) * width];
        let early = (0..=t)
            .filter(|&k| k as f64 <= half)
            .all(|k| row[k] as i64 - k as i64 <= setup.barrier_k as i64);
        let late = (0..=t)
            .filter(|&k| k as f64 >= half)
            .all(|k| row[k] as i64 - k as i64 <= -setup.x_n);
        if early && late {
            let w = prefix[m] - prefix[m - 1];
            if w > 0.0 {
                sum += w;
                qualifying += 1;
            }
        }
    }
    let log_q = if sum > 0.0 {
        setup.theta * target as f64 + (sum / prefix[n]).ln()
    } else {
        f64::NEG_INFINITY
    };
    QnSample {
        log_q,
        qualifying,
        height_full: full.height(),
        height_collapsed: tree.height(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnReport {
    pub n: usize,
    pub t: usize,
    pub x_n: i64,
    pub log_z: f64,
    pub replicas: usize,
    /// Mean of `Q t^{3/2} / Z_n` with its 95% half width.
    pub normalised_mean: f64,
    pub normalised_ci_half: f64,
    pub prediction: f64,
    /// Replicas where the collapsed tree was higher than the full one.
    pub dominance_violations: usize,
}

pub fn qn_statistic(cfg: &ExperimentConfig, rho_minus: f64) -> Result<QnReport> {
    let seq = Arc::new(cfg.weight_sequence()?);
    let c = cfg.constants(&seq)?;
    let setup = QnSetup::new(seq, c.theta, cfg.collapse_level, cfg.barrier_k, cfg.t)?;
    setup.base.prefix_sums(setup.n);
    setup.modified.prefix_sums(setup.n);
    let samples: Vec<QnSample> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(cfg.seed, setup.n as u64, r as u64);
            qn_sample(&setup, &mut rng)
        })
        .collect::<Result<_>>()?;
    let scale = (setup.t as f64).powf(1.5);
    let vals: Vec<f64> = samples.iter().map(|s| (s.log_q - setup.log_z).exp() * scale).collect();
    Ok(QnReport {
        n: setup.n,
        t: setup.t,
        x_n: setup.x_n,
        log_z: setup.log_z,
        replicas: cfg.replicas,
        normalised_mean: mean(&vals),
        normalised_ci_half: Z95 * (variance(&vals) / vals.len() as f64).sqrt(),
        prediction: setup.first_moment_constant(rho_minus),
        dominance_violations: samples.iter().filter(|s| s.height_collapsed > s.height_full).count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatWrtReport {
    pub n: usize,
    pub replicas: usize,
    pub heights_ks: KsResult,
    pub root_outdeg_chi2: ChiSquareResult,
    pub mean_height_pat: f64,
    pub mean_height_wrt: f64,
}

impl PatWrtReport {
    pub fn passes(&self, level: f64) -> bool {
        self.heights_ks.p_value > level && self.root_outdeg_chi2.p_value > level
    }
}

/// PAT(a) grown directly against WRT with fresh PAT-derived weights per
/// replica. The two samples use disjoint generator cells.
pub fn pat_wrt_equivalence(fit: &FitnessSequence, n: usize, replicas: usize, seed: u64) -> Result<PatWrtReport> {
    if n == 0 || replicas < 2 {
        return Err(Error::InvalidParameter("need n >= 1 and at least two replicas".into()));
    }
    fit.prefix_sums(n + 1);
    let pat: Vec<(u32, u32)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, 2 * n as u64, r as u64);
            let t = grow_pat(fit, n, &mut rng);
            (t.height(), t.outdeg(1))
        })
        .collect();
    let wrt: Vec<(u32, u32)> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<(u32, u32)> {
            let mut rng = replica_rng(seed, 2 * n as u64 + 1, r as u64);
            let w = pat_weights(fit, &mut rng)?;
            let t = grow_wrt(&w, n, &mut rng);
            Ok((t.height(), t.outdeg(1)))
        })
        .collect::<Result<_>>()?;
    let hp: Vec<f64> = pat.iter().map(|p| p.0 as f64).collect();
    let hw: Vec<f64> = wrt.iter().map(|p| p.0 as f64).collect();
    let max_deg = pat.iter().chain(&wrt).map(|p| p.1).max().unwrap_or(0) as usize;
    let mut cp = vec![0u64; max_deg + 1];
    let mut cw = vec![0u64; max_deg + 1];
    for p in &pat {
        cp[p.1 as usize] += 1;
    }
    for p in &wrt {
        cw[p.1 as usize] += 1;
    }
    Ok(PatWrtReport {
        n,
        replicas,
        heights_ks: ks_two_sample(&hp, &hw),
        root_outdeg_chi2: chi_square_two_sample(&cp, &cw, 5.0),
        mean_height_pat: mean(&hp),
        mean_height_wrt: mean(&hw),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEstimate {
    /// Parents of labels `2..=n`.
    pub parents: Vec<u32>,
    pub mean: f64,
    pub stderr: f64,
}

/// Probability of each recursive tree on `n` vertices under WRT with
/// PAT-derived weights, averaged over `draws` weight realisations.
pub fn pat_shapes_via_weights(fit: &FitnessSequence, n: usize, draws: usize, seed: u64) -> Result<Vec<ShapeEstimate>> {
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two weight draws".into()));
    }
    let per_draw: Vec<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|d| -> Result<Vec<f64>> {
            let mut rng = replica_rng(seed, n as u64, d as u64);
            let w = pat_weights(fit, &mut rng)?;
            Ok(enumerate_wrt(&w, n)?.into_iter().map(|e| e.probability).collect())
        })
        .collect::<Result<_>>()?;
    let shapes = enumerate_wrt(&WeightSequence::constant(1.0)?, n)?;
    Ok(shapes
        .into_iter()
        .enumerate()
        .map(|(idx, e)| {
            let col: Vec<f64> = per_draw.iter().map(|v| v[idx]).collect();
            ShapeEstimate {
                parents: e.tree.parents().to_vec(),
                mean: mean(&col),
                stderr: (variance(&col) / draws as f64).sqrt(),
            }
        })
        .collect())
}

/// Rows of a finished campaign and whether its built-in checks held.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<CsvRow>,
    pub passed: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let name = cfg.experiment.to_string();
    let reps = cfg.replicas;
    match cfg.experiment {
        ExperimentKind::Height => {
            let r = height_expansion(cfg)?;
            let mut rows = r.centered.csv_rows(&name);
            let n_last = *cfg.n_grid.last().unwrap();
            for &(n, m) in &r.mean_height {
                rows.push(CsvRow::new(&name, n, reps, "mean_height", m, None));
            }
            let slope = r.slope_fit;
            let ci = (slope.slope - Z95 * slope.slope_stderr, slope.slope + Z95 * slope.slope_stderr);
            rows.push(CsvRow::new(&name, n_last, reps, "slope", slope.slope, Some(ci)));
            rows.push(CsvRow::new(&name, n_last, reps, "slope_ratio", r.slope_ratio(), None));
            rows.push(CsvRow::new(&name, n_last, reps, "corrected_slope_ratio", r.corrected_slope_ratio(), None));
            let tight = r.centered.tightness();
            rows.push(CsvRow::new(&name, n_last, reps, "spread_variation", tight.spread_variation, None));
            rows.push(CsvRow::new(&name, n_last, reps, "median_drift", tight.median_drift, None));
            Ok(ExperimentOutput { rows, passed: true })
        }
        ExperimentKind::Tail => {
            let t = tail_bound(cfg)?;
            let mut rows: Vec<CsvRow> = t
                .rows
                .iter()
                .map(|r| CsvRow::new(&name, t.n, reps, &format!("tail_x{}", r.x), r.probability, Some(r.ci)))
                .collect();
            if let Some(f) = t.fit {
                let ci = (f.slope - Z95 * f.slope_stderr, f.slope + Z95 * f.slope_stderr);
                rows.push(CsvRow::new(&name, t.n, reps, "tail_slope", f.slope, Some(ci)));
            }
            Ok(ExperimentOutput { rows, passed: true })
        }
        ExperimentKind::Diameter => {
            let d = diameter_vs_height(cfg)?;
            let mut rows = d.centered_diameter.csv_rows(&name);
            rows.extend(d.centered_twice_height.csv_rows(&name));
            let n_last = *cfg.n_grid.last().unwrap();
            rows.push(CsvRow::new(&name, n_last, d.total, "diameter_exceeds_twice_height", d.violations as f64, None));
            Ok(ExperimentOutput {
                rows,
                passed: d.violations == 0,
            })
        }
        ExperimentKind::Qn => {
            let rho_minus = RenewalTable::exact(Direction::Descending, 1).rho;
            let q = qn_statistic(cfg, rho_minus)?;
            let ci = (q.normalised_mean - q.normalised_ci_half, q.normalised_mean + q.normalised_ci_half);
            let rows = vec![
                CsvRow::new(&name, q.n, reps, "q_normalised_mean", q.normalised_mean, Some(ci)),
                CsvRow::new(&name, q.n, reps, "q_prediction", q.prediction, None),
                CsvRow::new(&name, q.n, reps, "log_z", q.log_z, None),
                CsvRow::new(&name, q.n, reps, "collapse_dominance_violations", q.dominance_violations as f64, None),
            ];
            Ok(ExperimentOutput {
                rows,
                passed: q.dominance_violations == 0,
            })
        }
        ExperimentKind::PatWrt => {
            let fit = cfg.fitness_sequence()?;
            let n = *cfg.n_grid.last().unwrap();
            let r = pat_wrt_equivalence(&fit, n, reps, cfg.seed)?;
            let rows = vec![
                CsvRow::new(&name, n, reps, "height_ks_statistic", r.heights_ks.statistic, None),
                CsvRow::new(&name, n, reps, "height_ks_p_value", r.heights_ks.p_value, None),
                CsvRow::new(&name, n, reps, "root_outdeg_chi2_p_value", r.root_outdeg_chi2.p_value, None),
                CsvRow::new(&name, n, reps, "mean_height_pat", r.mean_height_pat, None),
                CsvRow::new(&name, n, reps, "mean_height_wrt", r.mean_height_wrt, None),
            ];
            Ok(ExperimentOutput {
                rows,
                passed: r.passes(0.01),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config() {
        let cfg = ExperimentConfig::parse(
            "# campaign\nexperiment = tail\nlog2_n = 4..6\nreplicas = 50\nseed = 7\nx = 1..3\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Tail);
        assert_eq!(cfg.n_grid, vec![16, 32, 64]);
        assert_eq!(cfg.x_grid, vec![1, 2, 3]);
        assert!(ExperimentConfig::parse("n = 64, 32\n").is_err());
        assert!(ExperimentConfig::parse("n = 4\n").is_err());
        assert!(ExperimentConfig::parse("replicas = 0\n").is_err());
        assert!(matches!(ExperimentConfig::parse("bogus = 1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn summary_quantiles_ordered() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64).collect();
        let s = SummaryRow::from_values(10, &v);
        assert!(s.quantiles.windows(2).all(|w| w[0] <= w[1]));
        for (q, (lo, hi)) in s.quantiles.iter().zip(s.quantile_ci) {
            assert!(lo <= *q && *q <= hi);
        }
    }

    #[test]
    fn tail_beyond_max_is_zero_and_monotone() {
        let c = solve_theta(1.0).unwrap();
        let hs = vec![10u32, 11, 12, 12, 13, 15];
        let t = tail_table(&hs, 64, c, &(-5..=30).collect::<Vec<_>>()).unwrap();
        assert_eq!(t.rows.last().unwrap().probability, 0.0);
        assert!(t.rows.windows(2).all(|w| w[1].probability <= w[0].probability));
    }

    #[test]
    fn path_tree_diameter_equals_height() {
        let parents: Vec<u32> = (1..10).collect();
        let t = Tree::from_parents(&parents).unwrap();
        assert_eq!(t.diameter(), t.height());
    }

    #[test]
    fn qn_zero_without_target_height() {
        let base = Arc::new(WeightSequence::constant(1.0).unwrap());
        let setup = QnSetup::new(base, 1.0, 5, 50, 12).unwrap();
        let star = Tree::from_parents(&vec![1; setup.n - 1]).unwrap();
        let s = qn_on_tree(&setup, &star, &star);
        assert_eq!(s.qualifying, 0);
        assert_eq!(s.q(), 0.0);
    }

    #[test]
    fn run_is_deterministic() {
        let cfg = ExperimentConfig::parse("experiment = height\nn = 64,128\nreplicas = 40\nseed = 3\n").unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_csv(&a.rows, &mut ba).unwrap();
        write_csv(&b.rows, &mut bb).unwrap();
        assert_eq!(ba, bb);
    }
}
