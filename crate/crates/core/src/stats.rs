//! Small statistical toolkit: least squares, quantiles, goodness-of-fit tests
//! and binomial confidence intervals.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; NaN with fewer than three points.
    pub slope_stderr: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if xs.len() > 2 {
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - slope * x - intercept;
                r * r
            })
            .sum();
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Two-sided Kolmogorov limiting tail `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction). Ties are handled by evaluating both
/// empirical CDFs after each distinct value, which is conservative for
/// discrete data.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsResult {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    KsResult {
        statistic: d,
        p_value: p,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells after pooling.
    pub cells: usize,
}

/// Pearson goodness of fit of `observed` counts against `expected_probs`.
/// Cells with expected count below `min_expected` are pooled together (the
/// pooled cell is kept if it reaches the minimum itself, otherwise merged
/// into the smallest kept cell).
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let total_p: f64 = expected_probs.iter().sum();
    let nt = total as f64;

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    let mut order: Vec<usize> = (0..observed.len()).collect();
    order.sort_by(|&x, &y| expected_probs[y].partial_cmp(&expected_probs[x]).unwrap());
    for idx in order {
        let e = expected_probs[idx] / total_p * nt;
        let o = observed[idx] as f64;
        if e >= min_expected {
            cells.push((o, e));
        } else {
            pool.0 += o;
            pool.1 += e;
        }
    }
    if pool.1 > 0.0 || pool.0 > 0.0 {
        if pool.1 >= min_expected || cells.is_empty() {
            cells.push(pool);
        } else {
            let last = cells.last_mut().unwrap();
            last.0 += pool.0;
            last.1 += pool.1;
        }
    }

    let mut stat = 0.0;
    for &(o, e) in &cells {
        if e > 0.0 {
            stat += (o - e) * (o - e) / e;
        } else if o > 0.0 {
            stat = f64::INFINITY;
        }
    }
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if stat.is_infinite() {
        0.0
    } else {
        ChiSquared::new(dof as f64).unwrap().sf(stat)
    };
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value,
        cells: cells.len(),
    }
}

/// Two-sample chi-square homogeneity test on count vectors.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cells = 0;
    let (mut pa, mut pb) = (0u64, 0u64);
    let flush = |oa: u64, ob: u64, stat: &mut f64, cells: &mut usize| {
        let col = (oa + ob) as f64;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        *stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
        *cells += 1;
    };
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col * (na.min(nb) as f64) / total >= min_expected {
            flush(x, y, &mut stat, &mut cells);
        } else {
            pa += x;
            pb += y;
        }
    }
    if pa + pb > 0 {
        flush(pa, pb, &mut stat, &mut cells);
    }
    let dof = cells.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).unwrap().sf(stat)
    };
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value,
        cells,
    }
}

/// Joint test for independent samples: statistics and degrees of freedom add.
pub fn combine_chi_square(parts: &[ChiSquareResult]) -> ChiSquareResult {
    let statistic: f64 = parts.iter().map(|r| r.statistic).sum();
    let dof: usize = parts.iter().map(|r| r.dof).sum();
    let cells = parts.iter().map(|r| r.cells).sum();
    let p_value = if dof == 0 {
        1.0
    } else if statistic.is_infinite() {
        0.0
    } else {
        ChiSquared::new(dof as f64).unwrap().sf(statistic)
    };
    ChiSquareResult {
        statistic,
        dof,
        p_value,
        cells,
    }
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept + 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
    }

    #[test]
    fn kolmogorov_tail_known_values() {
        // P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = (0..500).map(|i| i as f64 + 250.0).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn chi_square_exact_fit() {
        let r = chi_square_gof(&[25, 25, 50], &[0.25, 0.25, 0.5], 5.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[90, 10], &[0.5, 0.5], 5.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn wilson_contains_truth() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }
}
