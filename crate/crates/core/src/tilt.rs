//! Exponential tilt of the spine: parameters `p_i`, normaliser `Z_n`, the
//! many-to-one and many-to-two identities with exact small-`n` checks, the
//! law of `I_n` and the pair walks `(H^l, Hbar^l)`.
//!
//! Index 1 never contributes to a height: walks are `H_k = sum_{i=2}^k` of
//! their jump indicators, and `p_1 = q_1 = 1` is a convention only.

use rand::Rng;

use crate::error::{Error, Result};
use crate::spine::IdentityReport;
use crate::tree::enumerate_wrt;
use crate::weights::WeightSequence;

pub const MAX_MANY_TO_ONE: usize = 8;
pub const MAX_MANY_TO_TWO: usize = 6;

/// Tilt parameters for indices `1..=n`; slot 0 of each array is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltParams {
    theta: f64,
    q: Vec<f64>,
    p: Vec<f64>,
    /// `log Z_k`, with `log Z_1 = 0`.
    log_z: Vec<f64>,
}

pub fn tilt_params(seq: &WeightSequence, theta: f64, n: usize) -> Result<TiltParams> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::ThetaNotPositive(theta));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let prefix = seq.prefix_sums(n);
    let c = theta.exp_m1();
    let mut q = vec![0.0; n + 1];
    let mut p = vec![0.0; n + 1];
    let mut log_z = vec![0.0; n + 1];
    q[1] = 1.0;
    p[1] = 1.0;
    for i in 2..=n {
        let qi = (prefix[i] - prefix[i - 1]) / prefix[i];
        q[i] = qi;
        p[i] = (theta.exp() * qi / (1.0 + c * qi)).min(1.0);
        log_z[i] = log_z[i - 1] + (c * qi).ln_1p();
    }
    Ok(TiltParams { theta, q, p, log_z })
}

impl TiltParams {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Largest index covered.
    pub fn len(&self) -> usize {
        self.q.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q[i]
    }

    pub fn p(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn log_z(&self, n: usize) -> f64 {
        self.log_z[n]
    }

    pub fn z(&self, n: usize) -> f64 {
        self.log_z[n].exp()
    }

    /// `p_2, ..., p_n` as a slice.
    pub fn p_from_two(&self) -> &[f64] {
        &self.p[2.min(self.p.len())..]
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidParameter(format!(
                "n = {n} outside the tilt range 1..={}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `H_k = sum_{i=2}^k 1{U_i <= p_i}`; position `k - 1` holds `H_k`.
pub fn spine_walk<R: Rng + ?Sized>(params: &TiltParams, n: usize, rng: &mut R) -> Vec<u32> {
    assert!(n >= 1 && n <= params.len());
    let mut out = Vec::with_capacity(n);
    let mut h = 0;
    out.push(0);
    for i in 2..=n {
        if rng.random::<f64>() < params.p(i) {
            h += 1;
        }
        out.push(h);
    }
    out
}

/// Visits every outcome of independent Bernoulli variables with success
/// probabilities `probs`, passing the outcome and its probability.
fn for_each_outcome<F: FnMut(&[bool], f64)>(probs: &[f64], mut visit: F) {
    let mut buf = vec![false; probs.len()];
    fn rec<F: FnMut(&[bool], f64)>(k: usize, prob: f64, probs: &[f64], buf: &mut [bool], visit: &mut F) {
        if k == probs.len() {
            visit(buf, prob);
            return;
        }
        for (bit, pr) in [(false, 1.0 - probs[k]), (true, probs[k])] {
            if pr > 0.0 {
                buf[k] = bit;
                rec(k + 1, prob * pr, probs, buf, visit);
            }
        }
    }
    rec(0, 1.0, probs, &mut buf, &mut visit);
}

/// Turns jump indicators for indices `2..=n` into heights `H_1..H_n`.
fn heights_from_jumps(jumps: &[bool]) -> Vec<u32> {
    let mut out = Vec::with_capacity(jumps.len() + 1);
    let mut h = 0;
    out.push(0);
    for &j in jumps {
        h += j as u32;
        out.push(h);
    }
    out
}

/// `E[sum_i w_i/W_n e^{theta h(u_i)} F(traj(u_i))]` against `Z_n E[F(H)]`.
pub fn many_to_one_check<F>(seq: &WeightSequence, theta: f64, n: usize, f: F) -> Result<IdentityReport>
where
    F: Fn(&[u32]) -> f64,
{
    if n > MAX_MANY_TO_ONE {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_MANY_TO_ONE,
        });
    }
    let params = tilt_params(seq, theta, n)?;
    let w = seq.values(n);
    let wn = seq.partial_sum(n);
    let mut lhs = 0.0;
    for et in enumerate_wrt(seq, n)? {
        let mut inner = 0.0;
        for i in 1..=n {
            let h = et.tree.vertex_height(i) as f64;
            inner += w[i] / wn * (theta * h).exp() * f(&et.tree.trajectory(i));
        }
        lhs += et.probability * inner;
    }
    let mut expectation = 0.0;
    for_each_outcome(params.p_from_two(), |jumps, pr| {
        expectation += pr * f(&heights_from_jumps(jumps));
    });
    let rhs = params.z(n) * expectation;
    Ok(IdentityReport::new(lhs, rhs))
}

/// `P_theta(I_n = l)` at position `l - 1`.
pub fn in_law(params: &TiltParams, n: usize) -> Result<Vec<f64>> {
    params.check_n(n)?;
    let mut out = vec![0.0; n];
    let mut tail = 1.0;
    for l in (1..=n).rev() {
        out[l - 1] = params.p(l) * params.q(l) * tail;
        tail *= 1.0 - params.p(l) * params.q(l);
    }
    Ok(out)
}

/// Jump probability of `H^l` at index `i`.
pub fn pair_jump_probability(params: &TiltParams, ell: usize, i: usize) -> f64 {
    let (p, q) = (params.p(i), params.q(i));
    if i < ell {
        p
    } else if i == ell {
        1.0
    } else {
        let denom = 1.0 - p * q;
        if denom > 0.0 {
            p * (1.0 - q) / denom
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairWalk {
    pub ell: usize,
    /// Position `k - 1` holds `H^l_k`.
    pub h: Vec<u32>,
    pub hbar: Vec<u32>,
    /// Position `i - 1` holds `p^l_i`.
    pub p_ell: Vec<f64>,
    /// Position `i - 1` holds the realised `p~^l_i` for `i > l`, and 0 for `i <= l`.
    pub ptilde: Vec<f64>,
}

pub fn pair_walk<R: Rng + ?Sized>(params: &TiltParams, ell: usize, n: usize, rng: &mut R) -> Result<PairWalk> {
    params.check_n(n)?;
    if ell == 0 || ell > n {
        return Err(Error::LabelOutOfRange { label: ell, n });
    }
    let p_ell: Vec<f64> = (1..=n).map(|i| pair_jump_probability(params, ell, i)).collect();
    let mut h = Vec::with_capacity(n);
    h.push(0u32);
    for i in 2..=n {
        let jump = rng.random::<f64>() < p_ell[i - 1];
        h.push(h[i - 2] + jump as u32);
    }
    let mut ptilde = vec![0.0; n];
    let mut hbar = h[..ell].to_vec();
    for i in ell + 1..=n {
        let still = h[i - 1] == h[i - 2];
        ptilde[i - 1] = if still { params.p(i) } else { 0.0 };
        let jump = rng.random::<f64>() < ptilde[i - 1];
        hbar.push(hbar[i - 2] + jump as u32);
    }
    Ok(PairWalk {
        ell,
        h,
        hbar,
        p_ell,
        ptilde,
    })
}

/// Double sum over pairs of vertices weighted by `f(lab(u_i ^ u_j))` against
/// its spinal decomposition over `l = I_n`, both sides exact.
pub fn many_to_two_check<F, G>(seq: &WeightSequence, theta: f64, n: usize, big_f: F, f: G) -> Result<IdentityReport>
where
    F: Fn(&[u32]) -> f64,
    G: Fn(usize) -> f64,
{
    if n > MAX_MANY_TO_TWO {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_MANY_TO_TWO,
        });
    }
    let params = tilt_params(seq, theta, n)?;
    let w = seq.values(n);
    let wn = seq.partial_sum(n);
    let mut lhs = 0.0;
    for et in enumerate_wrt(seq, n)? {
        let t = &et.tree;
        let weights: Vec<f64> = (1..=n)
            .map(|i| w[i] / wn * (theta * t.vertex_height(i) as f64).exp() * big_f(&t.trajectory(i)))
            .collect();
        let mut inner = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                inner += weights[i - 1] * weights[j - 1] * f(t.mrca(i, j));
            }
        }
        lhs += et.probability * inner;
    }

    let law = in_law(&params, n)?;
    let c = theta.exp_m1();
    let mut total = 0.0;
    for ell in 1..=n {
        let fl = f(ell);
        if law[ell - 1] == 0.0 || fl == 0.0 {
            continue;
        }
        let probs: Vec<f64> = (2..=n).map(|i| pair_jump_probability(&params, ell, i)).collect();
        let mut expectation = 0.0;
        for_each_outcome(&probs, |jumps, pr| {
            let h = heights_from_jumps(jumps);
            let mut weight = (theta * h[ell - 1] as f64).exp();
            let free: Vec<usize> = (ell + 1..=n).filter(|&i| !jumps[i - 2]).collect();
            for &i in &free {
                weight *= 1.0 + c * params.q(i);
            }
            let fh = big_f(&h);
            let bar_probs: Vec<f64> = free.iter().map(|&i| params.p(i)).collect();
            for_each_outcome(&bar_probs, |bar, pr_bar| {
                let mut hbar = h[..ell].to_vec();
                let mut k = 0;
                for i in ell + 1..=n {
                    let jump = if !jumps[i - 2] {
                        k += 1;
                        bar[k - 1]
                    } else {
                        false
                    };
                    hbar.push(hbar[i - 2] + jump as u32);
                }
                expectation += pr * pr_bar * weight * fh * big_f(&hbar);
            });
        });
        total += law[ell - 1] * fl * expectation;
    }
    let rhs = params.z(n) * total;
    Ok(IdentityReport::new(lhs, rhs))
}

/// Indicator that `H_k <= intercept + slope * k` for every `k`.
pub fn barrier_indicator(intercept: f64, slope: f64) -> impl Fn(&[u32]) -> f64 {
    move |h: &[u32]| {
        h.iter()
            .enumerate()
            .all(|(idx, &v)| v as f64 <= intercept + slope * (idx + 1) as f64) as u8 as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn irregular() -> WeightSequence {
        WeightSequence::explicit(vec![1.0, 0.4, 2.5, 0.0, 1.2, 0.7, 3.0, 0.9]).unwrap()
    }

    #[test]
    fn z1_is_one_and_ratio_exact() {
        let seq = irregular();
        let t = tilt_params(&seq, 0.8, 8).unwrap();
        assert_eq!(t.z(1), 1.0);
        for n in 2..=8 {
            let ratio = t.z(n) / t.z(n - 1);
            assert!((ratio - (1.0 + 0.8f64.exp_m1() * t.q(n))).abs() < 1e-13);
            assert!(t.p(n) >= t.q(n) && t.p(n) <= 1.0);
        }
    }

    #[test]
    fn constant_weights_closed_form() {
        let seq = WeightSequence::constant(1.0).unwrap();
        let t = tilt_params(&seq, 1.0, 20).unwrap();
        let e = std::f64::consts::E;
        for i in 2..=20 {
            assert!((t.q(i) - 1.0 / i as f64).abs() < 1e-15);
            assert!((t.p(i) - e / (i as f64 + e - 1.0)).abs() < 1e-14);
        }
        assert!(tilt_params(&seq, 0.0, 5).is_err());
    }

    #[test]
    fn many_to_one_n2_any_function() {
        let seq = irregular();
        let f = |h: &[u32]| 3.0 + 5.0 * h[1] as f64;
        let r = many_to_one_check(&seq, 0.7, 2, f).unwrap();
        let (w1, w2) = (seq.w(1), seq.w(2));
        let w = w1 + w2;
        let expected = w1 / w * 3.0 + w2 / w * 0.7f64.exp() * 8.0;
        assert!((r.lhs - expected).abs() < 1e-12);
        assert!(r.holds(1e-10));
    }

    #[test]
    fn many_to_one_examples() {
        let seq = irregular();
        let r = many_to_one_check(&seq, 1.3, 5, |_| 1.0).unwrap();
        let t = tilt_params(&seq, 1.3, 5).unwrap();
        assert!((r.lhs - t.z(5)).abs() < 1e-10 * t.z(5));
        assert!(r.holds(1e-10));
        let r = many_to_one_check(&seq, 1.3, 6, barrier_indicator(0.5, 0.5)).unwrap();
        assert!(r.holds(1e-10), "{r:?}");
        assert!(many_to_one_check(&seq, 1.3, 9, |_| 1.0).is_err());
    }

    #[test]
    fn in_law_sums_to_one() {
        let seq = irregular();
        let t = tilt_params(&seq, 1.1, 8).unwrap();
        for n in 1..=8 {
            let law = in_law(&t, n).unwrap();
            assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((law[n - 1] - t.p(n) * t.q(n)).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_walk_structure() {
        let seq = WeightSequence::constant(1.0).unwrap();
        let t = tilt_params(&seq, 1.0, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let ell = rng.random_range(1..=30);
            let pw = pair_walk(&t, ell, 30, &mut rng).unwrap();
            assert_eq!(&pw.h[..ell], &pw.hbar[..ell]);
            if ell >= 2 {
                assert_eq!(pw.h[ell - 1] - pw.h[ell - 2], 1);
            }
            for i in ell + 1..=30 {
                let hj = pw.h[i - 1] != pw.h[i - 2];
                let bj = pw.hbar[i - 1] != pw.hbar[i - 2];
                assert!(!(hj && bj));
            }
        }
        let pw = pair_walk(&t, 30, 30, &mut rng).unwrap();
        assert_eq!(pw.h, pw.hbar);
        assert!(pair_walk(&t, 0, 30, &mut rng).is_err());
        assert!(pair_walk(&t, 31, 30, &mut rng).is_err());
    }

    #[test]
    fn many_to_two_examples() {
        let seq = irregular();
        let r = many_to_two_check(&seq, 0.9, 2, |_| 1.0, |_| 1.0).unwrap();
        let t = tilt_params(&seq, 0.9, 2).unwrap();
        assert!((r.lhs - t.z(2).powi(2)).abs() < 1e-12);
        assert!(r.holds(1e-10));
        let r = many_to_two_check(&seq, 0.9, 4, |_| 1.0, |l| (l == 1) as u8 as f64).unwrap();
        assert!(r.holds(1e-10), "{r:?}");
        let r = many_to_two_check(&seq, 0.9, 5, barrier_indicator(0.5, 0.4), |l| l as f64).unwrap();
        assert!(r.holds(1e-10), "{r:?}");
        assert!(many_to_two_check(&seq, 0.9, 7, |_| 1.0, |_| 1.0).is_err());
    }
}
