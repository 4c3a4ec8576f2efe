//! Acceptance criteria 1 to 12. Each test prints one `criterion N: PASS|FAIL`
//! line to the real stdout, so the lines show up without `--nocapture`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wrt_core::experiments::{
    diameter_vs_height, height_expansion, pat_shapes_via_weights, pat_wrt_equivalence, run_experiment, tail_bound,
    write_csv, ExperimentConfig, HeightExpansion,
};
use wrt_core::rw::{
    barrier_prediction, barrier_probability, coupling_bound, poisson_pmf, renewal_estimate, BarrierEvent, Direction,
    PoissonCoupler, PoissonSteps, RenewalTable, WalkSpec,
};
use wrt_core::spine::{grow_with_spines, grow_with_spines_under, SpineMeasure};
use wrt_core::stats::{chi_square_gof, combine_chi_square};
use wrt_core::tilt::{barrier_indicator, in_law, many_to_one_check, many_to_two_check, tilt_params};
use wrt_core::weights::IidLaw;
use wrt_core::{enumerate_wrt, solve_theta, FitnessSequence, Tree, WeightSequence};

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion}: {verdict} ({detail})").unwrap();
    out.flush().unwrap();
}

fn random_weights() -> Vec<WeightSequence> {
    vec![
        WeightSequence::iid(IidLaw::Exponential { mean: 1.0 }, 101).unwrap(),
        WeightSequence::iid(IidLaw::Uniform { low: 0.1, high: 3.0 }, 202).unwrap(),
        WeightSequence::iid(IidLaw::Gamma { shape: 0.5, scale: 2.0 }, 303).unwrap(),
    ]
}

type Functional = Box<dyn Fn(&[u32]) -> f64>;

fn battery() -> Vec<Functional> {
    let mut out: Vec<Functional> = vec![
        Box::new(|_| 1.0),
        Box::new(|_| 2.5),
        Box::new(|h| (*h.last().unwrap() == 0) as u8 as f64),
        Box::new(|h| (*h.last().unwrap() == 1) as u8 as f64),
        Box::new(|h| (*h.last().unwrap() == 2) as u8 as f64),
        Box::new(|h| (*h.last().unwrap() >= 2) as u8 as f64),
        Box::new(|h| *h.last().unwrap() as f64),
        Box::new(|h| (*h.last().unwrap() as f64).powi(2)),
        Box::new(|h| (-(*h.last().unwrap() as f64)).exp()),
        Box::new(|h| h.iter().map(|&x| x as f64).sum()),
        Box::new(|h| h.windows(2).filter(|w| w[1] > w[0]).count() as f64 * 0.3 + 0.1),
        Box::new(|h| (h.len() >= 3 && h[2] == 1) as u8 as f64),
        Box::new(|h| (h.iter().rev().take(2).all(|&x| x == h[h.len() - 1])) as u8 as f64),
    ];
    for (c, s) in [(0.0, 0.5), (1.0, 0.25), (0.0, 1.0), (1.0, 0.0), (0.5, 0.6), (2.0, -0.2), (0.0, 0.34)] {
        out.push(Box::new(barrier_indicator(c, s)));
    }
    out
}

#[test]
fn criterion_01_theta_solver() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 1..=100 {
        let gamma = k as f64 / 10.0;
        let c = solve_theta(gamma).unwrap();
        let th = c.theta;
        let residual = (1.0 + gamma * (th.exp() - 1.0 - th * th.exp())).abs();
        worst = worst.max(residual);
    }
    let at_one = (solve_theta(1.0).unwrap().theta - 1.0).abs();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && at_one <= 1e-10 && elapsed < 1.0;
    report(1, pass, &format!("max residual {worst:.2e}, |theta(1)-1| = {at_one:.2e}, {elapsed:.3}s"));
    assert!(pass);
}

#[test]
fn criterion_02_many_to_one_exact() {
    let start = Instant::now();
    let fs = battery();
    assert_eq!(fs.len(), 20);
    let mut worst = 0.0f64;
    for seq in random_weights() {
        for n in 2..=7 {
            for f in &fs {
                let r = many_to_one_check(&seq, 0.9, n, f).unwrap();
                worst = worst.max(r.rel_diff);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && elapsed < 60.0;
    report(2, pass, &format!("max relative difference {worst:.2e} over 360 checks, {elapsed:.1}s"));
    assert!(pass);
}

#[test]
fn criterion_03_many_to_two_exact() {
    let start = Instant::now();
    let fs = battery();
    let gs: Vec<Box<dyn Fn(usize) -> f64>> = vec![
        Box::new(|_| 1.0),
        Box::new(|l| (l == 1) as u8 as f64),
        Box::new(|l| 1.0 / l as f64),
        Box::new(|l| (l as f64).sqrt()),
    ];
    let mut worst = 0.0f64;
    let mut checks = 0;
    for seq in random_weights() {
        for n in 2..=5 {
            for (i, f) in fs.iter().enumerate() {
                let g = &gs[i % gs.len()];
                let r = many_to_two_check(&seq, 1.1, n, f, g).unwrap();
                worst = worst.max(r.rel_diff);
                checks += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && elapsed < 300.0;
    report(3, pass, &format!("max relative difference {worst:.2e} over {checks} checks, {elapsed:.1}s"));
    assert!(pass);
}

fn mrca_by_ancestor_sets(t: &Tree, u: usize, v: usize) -> usize {
    let chain = |mut x: usize| {
        let mut out = vec![x];
        while x != 1 {
            x = t.parent(x);
            out.push(x);
        }
        out
    };
    let a = chain(u);
    let b = chain(v);
    *a.iter().filter(|x| b.contains(x)).max().unwrap()
}

#[test]
fn criterion_04_two_spine_construction() {
    let seq = WeightSequence::iid(IidLaw::Exponential { mean: 1.0 }, 404).unwrap();
    let trees = enumerate_wrt(&seq, 5).unwrap();
    let index: HashMap<Vec<u32>, usize> =
        trees.iter().enumerate().map(|(i, e)| (e.tree.parents().to_vec(), i)).collect();
    let mut counts = vec![0u64; trees.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(4001);
    for _ in 0..1_000_000 {
        counts[index[grow_with_spines(&seq, 5, &mut rng).tree.parents()]] += 1;
    }
    let probs: Vec<f64> = trees.iter().map(|e| e.probability).collect();
    let tree_law = chi_square_gof(&counts, &probs, 5.0);

    let mut agree = 0u64;
    for _ in 0..100_000 {
        let run = grow_with_spines(&seq, 50, &mut rng);
        agree += (mrca_by_ancestor_sets(&run.tree, run.d_label, run.dt_label) == run.i_meet) as u64;
    }

    let params = tilt_params(&seq, 1.0, 50).unwrap();
    let law = in_law(&params, 50).unwrap();
    let mut meet = vec![0u64; 50];
    for _ in 0..100_000 {
        meet[grow_with_spines_under(&seq, 50, SpineMeasure::Tilted(&params), &mut rng).i_meet - 1] += 1;
    }
    let meet_law = chi_square_gof(&meet, &law, 5.0);

    let pass = tree_law.p_value > 0.001 && agree == 100_000 && meet_law.p_value > 0.01;
    report(
        4,
        pass,
        &format!(
            "tree law p = {:.3}, mrca agreement {agree}/100000, meeting label law p = {:.3}",
            tree_law.p_value, meet_law.p_value
        ),
    );
    assert!(pass);
}

fn height_campaign() -> &'static HeightExpansion {
    static CAMPAIGN: OnceLock<HeightExpansion> = OnceLock::new();
    CAMPAIGN.get_or_init(|| {
        let cfg = ExperimentConfig::parse(
            "experiment = height\nweights = constant:1\nlog2_n = 10..20\nreplicas = 200\nseed = 505\n",
        )
        .unwrap();
        height_expansion(&cfg).unwrap()
    })
}

#[test]
fn criterion_05_first_order_height() {
    let start = Instant::now();
    let h = height_campaign();
    let ratio = h.slope_ratio();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (ratio - 1.0).abs() <= 0.05 && elapsed < 600.0;
    report(
        5,
        pass,
        &format!(
            "slope {:.4} vs e = {:.4}, ratio {ratio:.4}; with the log log n term restored {:.4}, {elapsed:.1}s",
            h.slope_fit.slope,
            h.constants.speed,
            h.corrected_slope_ratio()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_tail_bound() {
    let start = Instant::now();
    let cfg = ExperimentConfig::parse(
        "experiment = tail\nweights = constant:1\nlog2_n = 16..16\nreplicas = 1000000\nseed = 606\nx = 1..8\n",
    )
    .unwrap();
    let t = tail_bound(&cfg).unwrap();
    let slope = t.fit.map_or(f64::NAN, |f| f.slope);
    let pass = t.slope_within(0.15) && elapsed_ok(start, 1200.0);
    report(
        6,
        pass,
        &format!("fitted slope {slope:.4}, bound -theta + 0.15 = {:.4}", -t.constants.theta + 0.15),
    );
    assert!(pass);
}

fn elapsed_ok(start: Instant, limit: f64) -> bool {
    start.elapsed().as_secs_f64() < limit
}

#[test]
fn criterion_07_tightness_proxy() {
    let t = height_campaign().centered.tightness();
    let pass = t.spread_variation <= 2.0 && t.median_drift <= 1.5;
    report(
        7,
        pass,
        &format!("spread variation {:.3} (band 2.0), median drift {:.3} (band 1.5)", t.spread_variation, t.median_drift),
    );
    assert!(pass);
}

#[test]
fn criterion_08_diameter() {
    let cfg = ExperimentConfig::parse(
        "experiment = diameter\nweights = constant:1\nlog2_n = 10..18\nreplicas = 200\nseed = 808\n",
    )
    .unwrap();
    let d = diameter_vs_height(&cfg).unwrap();
    let t = d.centered_diameter.tightness();
    let pass = d.violations == 0 && t.spread_variation <= 2.0 && t.median_drift <= 1.5;
    report(
        8,
        pass,
        &format!(
            "diam > 2h on {}/{} replicas, spread variation {:.3}, median drift {:.3}",
            d.violations, d.total, t.spread_variation, t.median_drift
        ),
    );
    assert!(pass);
}

/// `(outdeg + a_k) / (m - 1 + A_m)` multiplied along the attachment order.
fn pat_probability(parents: &[u32], a: &[f64]) -> f64 {
    let n = parents.len() + 1;
    let mut outdeg = vec![0.0; n + 1];
    let mut prob = 1.0;
    for m in 1..n {
        let k = parents[m - 1] as usize;
        let big_a: f64 = a[1..=m].iter().sum();
        prob *= (outdeg[k] + a[k]) / ((m - 1) as f64 + big_a);
        outdeg[k] += 1.0;
    }
    prob
}

#[test]
fn criterion_09_pat_wrt() {
    let fit = FitnessSequence::explicit(vec![1.0, 0.5, 2.0, 1.5, 0.7]).unwrap();
    let a = fit.values(5);
    let shapes = pat_shapes_via_weights(&fit, 4, 500_000, 909).unwrap();
    let mut worst_z = 0.0f64;
    for s in &shapes {
        let exact = pat_probability(&s.parents, &a);
        worst_z = worst_z.max((s.mean - exact).abs() / s.stderr);
    }
    let fit_big = FitnessSequence::constant(1.0).unwrap();
    let eq = pat_wrt_equivalence(&fit_big, 1000, 20_000, 910).unwrap();
    let pass = worst_z <= 3.0 && eq.heights_ks.p_value > 0.01;
    report(
        9,
        pass,
        &format!(
            "n=4 shapes: worst |z| {worst_z:.2} over {} shapes; n=1000 height KS p = {:.3}, root degree p = {:.3}",
            shapes.len(),
            eq.heights_ks.p_value,
            eq.root_outdeg_chi2.p_value
        ),
    );
    assert!(pass);
}

fn random_spec(rng: &mut ChaCha8Rng) -> (WalkSpec, usize, usize) {
    let blocks = rng.random_range(4..16);
    let mut j = vec![1usize];
    let mut r = Vec::new();
    for _ in 0..blocks {
        let size = rng.random_range(4..40);
        let mut block: Vec<f64> = (0..size).map(|_| rng.random_range(0.5..1.5)).collect();
        let scale = rng.random_range(0.9..1.1) / block.iter().sum::<f64>();
        block.iter_mut().for_each(|x| *x *= scale);
        r.extend(block);
        j.push(j.last().unwrap() + size);
    }
    let m = rng.random_range(0..blocks / 2);
    (WalkSpec::new(r, j).unwrap(), m, blocks)
}

#[test]
fn criterion_10_poisson_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let reps = 20_000u64;
    let mut bound_ok = 0;
    let mut parts = Vec::new();
    for _ in 0..50 {
        let (spec, m, n) = random_spec(&mut rng);
        let bound = coupling_bound(&spec, m, n).unwrap();
        let coupler = PoissonCoupler::new(&spec, m, n, 100_000).unwrap();
        let k = rng.random_range(m + 1..=n);
        let mut ys = vec![0u64; 30];
        let mut zs = vec![0u64; 30];
        let mut disagree = 0u64;
        for _ in 0..reps {
            let c = coupler.sample(&mut rng);
            let i = k - m;
            ys[((c.s[i] - c.s[i - 1] + 1) as usize).min(29)] += 1;
            zs[((c.s_hat[i] - c.s_hat[i - 1] + 1) as usize).min(29)] += 1;
            disagree += c.first_disagreement.is_some() as u64;
        }
        let b = bound.min(1.0);
        let sigma = (b * (1.0 - b) / reps as f64).sqrt();
        if disagree as f64 / reps as f64 <= bound + 3.0 * sigma {
            bound_ok += 1;
        }
        let mut py = coupler.block_pmf(k).to_vec();
        py.resize(30, 0.0);
        let tail: f64 = py[29..].iter().sum::<f64>() + coupler.block_pmf(k).iter().skip(30).sum::<f64>();
        py[29] = tail;
        let mut pz = poisson_pmf(1.0);
        let ptail: f64 = pz.iter().skip(29).sum();
        pz.resize(30, 0.0);
        pz[29] = ptail;
        parts.push(chi_square_gof(&ys, &py, 5.0));
        parts.push(chi_square_gof(&zs, &pz, 5.0));
    }
    let combined = combine_chi_square(&parts);
    let pass = bound_ok == 50 && combined.p_value > 0.01;
    report(
        10,
        pass,
        &format!(
            "disagreement within bound + 3 sigma on {bound_ok}/50 specs; combined marginal chi-square p = {:.3} ({} dof)",
            combined.p_value, combined.dof
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_renewal_and_barrier() {
    let start = Instant::now();
    let up = renewal_estimate(Direction::Ascending, 8, 10_000, 10_000, 1111).unwrap();
    let down = renewal_estimate(Direction::Descending, 8, 10_000, 10_000, 1112).unwrap();
    let r = RenewalTable::exact(Direction::Ascending, 8);
    let r_minus = RenewalTable::exact(Direction::Descending, 8);
    let zero_ok = up.r(0) == 1.0 && down.r(0) == 1.0 && r.r(0) == 1.0 && r_minus.r(0) == 1.0;
    let ev = BarrierEvent {
        k: 5,
        l: 0,
        a: 3,
        lambda: 0.5,
        n: 400,
    };
    let est = barrier_probability(&PoissonSteps::new(), &ev, 10_000_000, 1113).unwrap();
    let pred = barrier_prediction(&r, &r_minus, &ev).unwrap();
    let ratio = est.probability / pred;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = zero_ok && (0.7..=1.4).contains(&ratio) && elapsed < 1800.0;
    report(
        11,
        pass,
        &format!(
            "R(0) = {}, R-(0) = {}; barrier {:.4e} [{:.4e}, {:.4e}] vs prediction {pred:.4e}, ratio {ratio:.3}, {elapsed:.0}s",
            up.r(0),
            down.r(0),
            est.probability,
            est.ci_low,
            est.ci_high
        ),
    );
    assert!(pass);
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let out = run_experiment(cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&out.rows, &mut buf).unwrap();
    buf
}

#[test]
fn criterion_12_determinism() {
    let configs = [
        "experiment = height\nweights = iid:exp:1:7\nlog2_n = 8..11\nreplicas = 100\nseed = 1201\n",
        "experiment = tail\nweights = constant:1\nn = 512\nreplicas = 2000\nseed = 1202\nx = 0..4\n",
        "experiment = diameter\nweights = power:1:0.5\nn = 64,256\nreplicas = 100\nseed = 1203\n",
        "experiment = qn\nweights = constant:1\nn = 1\nreplicas = 200\nseed = 1204\nK = 2\nN = 3\nt = 12\n",
        "experiment = pat-wrt\nfitness = constant:1\nn = 200\nreplicas = 500\nseed = 1205\n",
    ];
    let mut identical = 0;
    for text in configs {
        let cfg = ExperimentConfig::parse(text).unwrap();
        let first = csv_bytes(&cfg);
        let again = csv_bytes(&cfg);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let other = pool.install(|| csv_bytes(&cfg));
        identical += (!first.is_empty() && first == again && first == other) as usize;
    }
    let ev = BarrierEvent {
        k: 3,
        l: 0,
        a: 1,
        lambda: 0.5,
        n: 60,
    };
    let a = barrier_probability(&PoissonSteps::new(), &ev, 100_000, 1206).unwrap();
    let b = barrier_probability(&PoissonSteps::new(), &ev, 100_000, 1206).unwrap();
    let barrier_same = a == b;
    let pass = identical == configs.len() && barrier_same;
    report(
        12,
        pass,
        &format!("{identical}/{} campaigns bit-identical across reruns and thread pools; barrier rerun identical: {barrier_same}", configs.len()),
    );
    assert!(pass);
}
