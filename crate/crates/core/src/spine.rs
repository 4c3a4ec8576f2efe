//! Growth of a WRT together with two distinguished vertices `D_n` and
//! `D~_n`, driven by Bernoulli pairs `(B_i, B~_i)` and fallback parents `J_m`.
//!
//! The driver-to-run map is deterministic ([`build_from_drivers`]), so exact
//! checks enumerate drivers with their probabilities instead of working out
//! the conditional law of the spines by hand.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tilt::TiltParams;
use crate::tree::{enumerate_wrt, sample_by_prefix, Tree, MAX_ENUMERATION};
use crate::weights::WeightSequence;

/// Largest `n` for exact driver enumeration; `prod_{m<n} (m + 3)` branches.
pub const MAX_SPINE_ENUMERATION: usize = 7;

/// Randomness consumed when vertex `m + 1` is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDrivers {
    pub b: bool,
    pub bt: bool,
    /// Fallback parent label in `1..=m`, only read when `b` and `bt` are both 0.
    pub j: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpineRun {
    pub tree: Tree,
    pub d_label: usize,
    pub dt_label: usize,
    /// `b[i] = B_i` for `1 <= i <= n`, with `B_1 = 1`; slot 0 unused.
    pub b: Vec<bool>,
    pub bt: Vec<bool>,
    /// Last index `k <= n` with `B_k = B~_k = 1`.
    pub i_meet: usize,
    /// Position `k - 1` holds `h(D_k)`.
    pub d_height_traj: Vec<u32>,
}

impl SpineRun {
    pub fn n(&self) -> usize {
        self.tree.n()
    }

    /// `h(D~_n(k))` for `k = 1..=n`, rebuilt from the Bernoulli sequences:
    /// the two spines agree up to `I_n`, after which `D~` only moves on
    /// `B~ = 1` steps.
    pub fn dt_height_traj(&self) -> Vec<u32> {
        let n = self.n();
        let mut out = Vec::with_capacity(n);
        let mut h = 0u32;
        for k in 1..=n {
            if k >= 2 {
                let jump = if k <= self.i_meet { self.b[k] } else { self.bt[k] };
                h += jump as u32;
            }
            out.push(h);
        }
        out
    }
}

/// Replays the two-spine construction from explicit drivers;
/// `steps[m - 1]` adds vertex `m + 1`.
pub fn build_from_drivers(steps: &[StepDrivers]) -> Result<SpineRun> {
    let n = steps.len() + 1;
    let mut tree = Tree::with_capacity(n);
    let (mut d, mut dt) = (1usize, 1usize);
    let mut b = vec![false; n + 1];
    let mut bt = vec![false; n + 1];
    b[1] = true;
    bt[1] = true;
    let mut i_meet = 1;
    let mut traj = Vec::with_capacity(n);
    traj.push(0);
    for (idx, s) in steps.iter().enumerate() {
        let m = idx + 1;
        let new = m + 1;
        b[new] = s.b;
        bt[new] = s.bt;
        match (s.b, s.bt) {
            (true, false) => {
                tree.push(d as u32);
                d = new;
            }
            (false, true) => {
                tree.push(dt as u32);
                dt = new;
            }
            (true, true) => {
                tree.push(d as u32);
                d = new;
                dt = new;
                i_meet = new;
            }
            (false, false) => {
                let j = s.j as usize;
                if j == 0 || j > m {
                    return Err(Error::LabelOutOfRange { label: j, n: m });
                }
                tree.push(s.j);
            }
        }
        traj.push(tree.vertex_height(d));
    }
    Ok(SpineRun {
        tree,
        d_label: d,
        dt_label: dt,
        b,
        bt,
        i_meet,
        d_height_traj: traj,
    })
}

/// Law of the first spine's Bernoulli variables.
#[derive(Debug, Clone, Copy)]
pub enum SpineMeasure<'a> {
    /// `B_i ~ Bernoulli(w_i / W_i)`: the plain coupling, tree law WRT(w).
    Plain,
    /// `B_i ~ Bernoulli(p_i)`: the exponentially tilted measure.
    Tilted(&'a TiltParams),
}

pub fn grow_with_spines<R: Rng + ?Sized>(seq: &WeightSequence, n: usize, rng: &mut R) -> SpineRun {
    grow_with_spines_under(seq, n, SpineMeasure::Plain, rng)
}

pub fn grow_with_spines_under<R: Rng + ?Sized>(
    seq: &WeightSequence,
    n: usize,
    measure: SpineMeasure<'_>,
    rng: &mut R,
) -> SpineRun {
    assert!(n >= 1, "trees have at least one vertex");
    let prefix = seq.prefix_sums(n);
    if let SpineMeasure::Tilted(params) = measure {
        assert!(params.len() >= n, "tilt parameters cover only {} indices", params.len());
    }
    let mut steps = Vec::with_capacity(n - 1);
    for m in 1..n {
        let i = m + 1;
        let q = (prefix[i] - prefix[i - 1]) / prefix[i];
        let pb = match measure {
            SpineMeasure::Plain => q,
            SpineMeasure::Tilted(params) => params.p(i),
        };
        let b = rng.random::<f64>() < pb;
        let bt = rng.random::<f64>() < q;
        let j = if !b && !bt {
            sample_by_prefix(&prefix, m, rng) as u32
        } else {
            0
        };
        steps.push(StepDrivers { b, bt, j });
    }
    build_from_drivers(&steps).expect("sampled drivers are valid")
}

/// Every driver outcome of the plain coupling with positive probability,
/// paired with that probability.
pub fn enumerate_spine_runs(seq: &WeightSequence, n: usize) -> Result<Vec<(SpineRun, f64)>> {
    if n > MAX_SPINE_ENUMERATION {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_SPINE_ENUMERATION,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("trees have at least one vertex".into()));
    }
    let prefix = seq.prefix_sums(n);
    let mut out = Vec::new();
    let mut steps = Vec::with_capacity(n - 1);
    fn rec(
        m: usize,
        n: usize,
        prob: f64,
        prefix: &[f64],
        steps: &mut Vec<StepDrivers>,
        out: &mut Vec<(SpineRun, f64)>,
    ) -> Result<()> {
        if m == n {
            out.push((build_from_drivers(steps)?, prob));
            return Ok(());
        }
        let i = m + 1;
        let q = (prefix[i] - prefix[i - 1]) / prefix[i];
        let branch = |s: StepDrivers, p: f64, steps: &mut Vec<StepDrivers>, out: &mut Vec<(SpineRun, f64)>| {
            if p > 0.0 {
                steps.push(s);
                let r = rec(m + 1, n, prob * p, prefix, steps, out);
                steps.pop();
                r
            } else {
                Ok(())
            }
        };
        branch(StepDrivers { b: true, bt: false, j: 0 }, q * (1.0 - q), steps, out)?;
        branch(StepDrivers { b: false, bt: true, j: 0 }, (1.0 - q) * q, steps, out)?;
        branch(StepDrivers { b: true, bt: true, j: 0 }, q * q, steps, out)?;
        for j in 1..=m {
            let pj = (prefix[j] - prefix[j - 1]) / prefix[m];
            branch(
                StepDrivers { b: false, bt: false, j: j as u32 },
                (1.0 - q) * (1.0 - q) * pj,
                steps,
                out,
            )?;
        }
        Ok(())
    }
    rec(1, n, 1.0, &prefix, &mut steps, &mut out)?;
    Ok(out)
}

/// Both sides of an identity and how far apart they are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    /// `|lhs - rhs| / max(|rhs|, tiny)`.
    pub rel_diff: f64,
    /// Standard error of the left side when it was estimated by simulation.
    pub lhs_stderr: Option<f64>,
}

impl IdentityReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let abs_diff = (lhs - rhs).abs();
        let rel_diff = if rhs.abs() > f64::MIN_POSITIVE {
            abs_diff / rhs.abs()
        } else {
            abs_diff
        };
        IdentityReport {
            lhs,
            rhs,
            abs_diff,
            rel_diff,
            lhs_stderr: None,
        }
    }

    /// True when both sides agree to relative tolerance `tol`, or both are
    /// below `tol` in absolute value.
    pub fn holds(&self, tol: f64) -> bool {
        self.rel_diff <= tol || (self.lhs.abs() <= tol && self.rhs.abs() <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Exact,
    MonteCarlo { replicas: usize, seed: u64 },
}

/// Compares `E[Phi(T_n, D_n, D~_n)]` with
/// `E[sum_{i,j} w_i w_j / W_n^2 Phi(T_n, u_i, u_j)]`, the right side by exact
/// tree enumeration and the left by driver enumeration or simulation.
pub fn verify_two_point_identity<F>(seq: &WeightSequence, n: usize, phi: F, mode: VerifyMode) -> Result<IdentityReport>
where
    F: Fn(&Tree, usize, usize) -> f64,
{
    let trees = enumerate_wrt(seq, n.min(MAX_ENUMERATION + 1))?;
    let w = seq.values(n);
    let wn = seq.partial_sum(n);
    let mut rhs = 0.0;
    for et in &trees {
        let mut inner = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                inner += w[i] * w[j] * phi(&et.tree, i, j);
            }
        }
        rhs += et.probability * inner / (wn * wn);
    }
    match mode {
        VerifyMode::Exact => {
            let runs = enumerate_spine_runs(seq, n)?;
            let lhs = runs
                .iter()
                .map(|(run, p)| p * phi(&run.tree, run.d_label, run.dt_label))
                .sum();
            Ok(IdentityReport::new(lhs, rhs))
        }
        VerifyMode::MonteCarlo { replicas, seed } => {
            let mut rng = crate::rng::seeded(seed);
            let vals: Vec<f64> = (0..replicas)
                .map(|_| {
                    let run = grow_with_spines(seq, n, &mut rng);
                    phi(&run.tree, run.d_label, run.dt_label)
                })
                .collect();
            let lhs = crate::stats::mean(&vals);
            let se = (crate::stats::variance(&vals) / replicas as f64).sqrt();
            let mut r = IdentityReport::new(lhs, rhs);
            r.lhs_stderr = Some(se);
            Ok(r)
        }
    }
}

/// One-point version: `E[Psi(T_n, D_n)] = E[sum_i w_i / W_n Psi(T_n, u_i)]`,
/// both sides exact.
pub fn verify_one_point_identity<F>(seq: &WeightSequence, n: usize, psi: F) -> Result<IdentityReport>
where
    F: Fn(&Tree, usize) -> f64,
{
    let trees = enumerate_wrt(seq, n)?;
    let w = seq.values(n);
    let wn = seq.partial_sum(n);
    let rhs = trees
        .iter()
        .map(|et| et.probability * (1..=n).map(|i| w[i] / wn * psi(&et.tree, i)).sum::<f64>())
        .sum();
    let lhs = enumerate_spine_runs(seq, n)?
        .iter()
        .map(|(run, p)| p * psi(&run.tree, run.d_label))
        .sum();
    Ok(IdentityReport::new(lhs, rhs))
}
