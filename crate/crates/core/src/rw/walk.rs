//! Blocked inhomogeneous Bernoulli walks `S_k = sum_{l<=k} Y_l - k`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tilt::TiltParams;

/// Jump probabilities `r_j` (`j >= 2`) grouped into blocks
/// `j_{k-1} + 1 ..= j_k` with `j_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    /// `r[j]` for `j` in `0..=j_last`; slots 0 and 1 are unused.
    r: Vec<f64>,
    j: Vec<usize>,
}

impl WalkSpec {
    /// `r` lists `r_2, r_3, ...`; `j` lists `j_0 = 1, j_1, ...`.
    pub fn new(r: Vec<f64>, j: Vec<usize>) -> Result<Self> {
        if j.first() != Some(&1) {
            return Err(Error::InvalidWalkSpec("j_0 must equal 1".into()));
        }
        if j.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWalkSpec("block boundaries must be strictly increasing".into()));
        }
        if let Some((idx, v)) = r.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidWalkSpec(format!("r_{} = {v} outside [0, 1]", idx + 2)));
        }
        let last = *j.last().unwrap();
        if r.len() + 1 < last {
            return Err(Error::InvalidWalkSpec(format!(
                "r covers indices up to {} but blocks reach {last}",
                r.len() + 1
            )));
        }
        let mut full = vec![0.0; 2];
        full.extend_from_slice(&r[..last - 1]);
        Ok(WalkSpec { r: full, j })
    }

    /// `blocks` blocks of `size` entries, each equal to `1 / size`.
    pub fn uniform_blocks(blocks: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidWalkSpec("block size must be positive".into()));
        }
        let r = vec![1.0 / size as f64; blocks * size];
        let j = (0..=blocks).map(|k| 1 + k * size).collect();
        WalkSpec::new(r, j)
    }

    /// Spine walk of the tilted measure seen on the time-changed grid:
    /// `r_j = p_j` and `j_k = i_k` for `k <= t_max`.
    pub fn from_tilt(params: &TiltParams, t_max: usize) -> Result<(WalkSpec, TimeChange)> {
        let p: Vec<f64> = (0..=params.len()).map(|i| if i >= 1 { params.p(i) } else { 0.0 }).collect();
        let tc = time_change(&p, t_max)?;
        let last = tc.i[t_max];
        let spec = WalkSpec::new(p[2..=last].to_vec(), tc.i.clone())?;
        Ok((spec, tc))
    }

    pub fn blocks(&self) -> usize {
        self.j.len() - 1
    }

    pub fn boundary(&self, k: usize) -> usize {
        self.j[k]
    }

    pub fn r(&self, j: usize) -> f64 {
        self.r[j]
    }

    /// `r_j` over block `k >= 1`.
    pub fn block(&self, k: usize) -> &[f64] {
        &self.r[self.j[k - 1] + 1..=self.j[k]]
    }

    pub fn block_mean(&self, k: usize) -> f64 {
        self.block(k).iter().sum()
    }

    /// `E[S_k]`.
    pub fn mean_s(&self, k: usize) -> f64 {
        (1..=k).map(|l| self.block_mean(l)).sum::<f64>() - k as f64
    }

    /// Spec of `(S_{k+s} - S_s)_k`: `r'_i = r_{j_s + i - 1}`, `j'_k = j_{s+k} - j_s + 1`.
    pub fn shifted(&self, s: usize) -> Result<WalkSpec> {
        if s > self.blocks() {
            return Err(Error::InvalidWalkSpec(format!("shift {s} beyond {} blocks", self.blocks())));
        }
        let js = self.j[s];
        let r = self.r[js + 1..].to_vec();
        let j = self.j[s..].iter().map(|&x| x - js + 1).collect();
        WalkSpec::new(r, j)
    }

    /// `S_0, ..., S_k` from fresh uniforms.
    pub fn sample_path<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<i64> {
        assert!(k <= self.blocks());
        let mut s = Vec::with_capacity(k + 1);
        s.push(0i64);
        for l in 1..=k {
            let y = self.block(l).iter().filter(|&&r| rng.random::<f64>() < r).count() as i64;
            s.push(s[l - 1] + y - 1);
        }
        s
    }
}

/// `i_0 = 1` and `i_k = inf{i : sum_{j=2}^i p_j >= k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeChange {
    pub i: Vec<usize>,
}

impl TimeChange {
    /// Smallest `t` with `i_t >= n`, if it lies in the computed range.
    pub fn tau(&self, n: usize) -> Option<usize> {
        let t = self.i.partition_point(|&x| x < n);
        (t < self.i.len()).then_some(t)
    }
}

/// `p[j]` is `p_j`; entries 0 and 1 are ignored.
pub fn time_change(p: &[f64], t_max: usize) -> Result<TimeChange> {
    let mut i = Vec::with_capacity(t_max + 1);
    i.push(1);
    let mut cum = 0.0;
    let mut k = 1;
    for (idx, &pj) in p.iter().enumerate().skip(2) {
        if k > t_max {
            break;
        }
        cum += pj;
        while k <= t_max && cum >= k as f64 {
            i.push(idx);
            k += 1;
        }
    }
    if k <= t_max {
        return Err(Error::TimeChangeUnreachable { t_max, reached: cum });
    }
    Ok(TimeChange { i })
}

/// Error terms of a spec; position `k` holds the value at `k` (slot 0 is 0
/// for `delta` and `eta`).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTerms {
    pub delta: Vec<f64>,
    pub big_delta: Vec<f64>,
    pub eta: Vec<f64>,
}

/// `floor(k^{1/4})` without rounding trouble.
pub fn fourth_root_floor(k: usize) -> usize {
    let mut r = (k as f64).powf(0.25) as usize;
    while (r + 1).pow(4) <= k {
        r += 1;
    }
    while r > 0 && r.pow(4) > k {
        r -= 1;
    }
    r
}

pub fn error_terms(spec: &WalkSpec, k_max: usize) -> Result<ErrorTerms> {
    if k_max > spec.blocks() {
        return Err(Error::InvalidWalkSpec(format!("k_max {k_max} beyond {} blocks", spec.blocks())));
    }
    let mut delta = vec![0.0; k_max + 1];
    let mut big_delta = vec![0.0f64; k_max + 1];
    let mut mean = 0.0;
    for k in 1..=k_max {
        let m = spec.block_mean(k);
        delta[k] = (m - 1.0).abs();
        mean += m - 1.0;
        big_delta[k] = big_delta[k - 1].max(mean.abs());
    }
    let last = spec.boundary(k_max);
    let mut sq = vec![0.0; last + 1];
    for j in 2..=last {
        sq[j] = sq[j - 1] + spec.r(j) * spec.r(j);
    }
    let mut dsum = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        dsum[k] = dsum[k - 1] + delta[k];
    }
    let mut eta = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        let lo = fourth_root_floor(k);
        let r2 = sq[spec.boundary(k)] - sq[spec.boundary(lo)];
        let d = dsum[k] - if lo > 0 { dsum[lo - 1] } else { 0.0 };
        eta[k] = 2.0 * r2 + 2.0 * d;
    }
    Ok(ErrorTerms {
        delta,
        big_delta,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilt::tilt_params;
    use crate::weights::WeightSequence;

    #[test]
    fn validation() {
        assert!(WalkSpec::new(vec![0.5], vec![0, 2]).is_err());
        assert!(WalkSpec::new(vec![0.5, 0.5], vec![1, 3, 3]).is_err());
        assert!(WalkSpec::new(vec![1.5], vec![1, 2]).is_err());
        assert!(WalkSpec::new(vec![0.5], vec![1, 3]).is_err());
        assert!(WalkSpec::new(vec![0.5], vec![1, 2]).is_ok());
    }

    #[test]
    fn time_change_examples() {
        let p = vec![1.0; 50];
        let tc = time_change(&p, 10).unwrap();
        assert_eq!(tc.i[0], 1);
        for k in 1..=10 {
            assert_eq!(tc.i[k], k + 1);
        }
        assert_eq!(tc.tau(1), Some(0));
        assert_eq!(tc.tau(5), Some(4));
        assert_eq!(tc.tau(100), None);
        assert!(time_change(&p, 60).is_err());
    }

    #[test]
    fn error_terms_examples() {
        let spec = WalkSpec::new(vec![0.3], vec![1, 2]).unwrap();
        let e = error_terms(&spec, 1).unwrap();
        assert!((e.delta[1] - 0.7).abs() < 1e-15);
        let spec = WalkSpec::uniform_blocks(20, 4).unwrap();
        let e = error_terms(&spec, 20).unwrap();
        assert!(e.delta.iter().all(|&d| d < 1e-12));
        assert!(e.big_delta.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn fourth_roots() {
        assert_eq!(fourth_root_floor(0), 0);
        assert_eq!(fourth_root_floor(1), 1);
        assert_eq!(fourth_root_floor(15), 1);
        assert_eq!(fourth_root_floor(16), 2);
        assert_eq!(fourth_root_floor(80), 2);
        assert_eq!(fourth_root_floor(81), 3);
    }

    #[test]
    fn shift_and_tilt_spec() {
        let spec = WalkSpec::new(vec![0.1, 0.2, 0.3, 0.4, 0.5], vec![1, 2, 4, 6]).unwrap();
        let sh = spec.shifted(1).unwrap();
        assert_eq!(sh.blocks(), 2);
        assert_eq!(sh.block(1), &[0.2, 0.3]);
        assert_eq!(sh.block(2), &[0.4, 0.5]);

        let seq = WeightSequence::constant(1.0).unwrap();
        let t = tilt_params(&seq, 1.0, 5000).unwrap();
        let (spec, tc) = WalkSpec::from_tilt(&t, 12).unwrap();
        assert_eq!(spec.blocks(), 12);
        for k in 1..=12 {
            assert_eq!(spec.boundary(k), tc.i[k]);
            let bound = t.p(tc.i[k]) + if k > 1 { t.p(tc.i[k - 1]) } else { 0.0 };
            assert!((spec.block_mean(k) - 1.0).abs() <= bound + 1e-12);
        }
    }
}
