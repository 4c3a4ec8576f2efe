use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wrt_core::experiments::{
    pat_shapes_via_weights, qn_sample, run_experiment, write_csv, ExperimentConfig, QnSetup,
};
use wrt_core::stats::chi_square_gof;
use wrt_core::{enumerate_wrt, grow_pat, grow_wrt, FitnessSequence, Tree, WeightSequence};

fn fitness() -> FitnessSequence {
    FitnessSequence::explicit(vec![1.0, 0.5, 2.0, 1.5, 0.7, 1.1, 0.9]).unwrap()
}

/// Product of attachment probabilities `(outdeg + a_k) / (m - 1 + A_m)`;
/// `parents` lists the parents of labels `2..=n`, `a[k]` is `a_k`.
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
fn pat_shapes_match_direct_attachment() {
    let fit = fitness();
    let a = fit.values(7);
    let est = pat_shapes_via_weights(&fit, 4, 200_000, 3).unwrap();
    assert_eq!(est.len(), 6);
    let mut total = 0.0;
    for s in &est {
        let exact = pat_probability(&s.parents, &a);
        total += exact;
        assert!((s.mean - exact).abs() <= 4.0 * s.stderr, "{s:?} vs {exact}");
    }
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn grown_pat_matches_exact_shape_law() {
    let fit = fitness();
    let a = fit.values(7);
    let shapes = enumerate_wrt(&WeightSequence::constant(1.0).unwrap(), 5).unwrap();
    let index: HashMap<Vec<u32>, usize> =
        shapes.iter().enumerate().map(|(i, e)| (e.tree.parents().to_vec(), i)).collect();
    let probs: Vec<f64> = shapes.iter().map(|e| pat_probability(e.tree.parents(), &a)).collect();
    let mut counts = vec![0u64; shapes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200_000 {
        counts[index[grow_pat(&fit, 5, &mut rng).parents()]] += 1;
    }
    let r = chi_square_gof(&counts, &probs, 5.0);
    assert!(r.p_value > 0.001, "{r:?}");
}

/// Longest path by two breadth-first sweeps.
fn diameter_by_bfs(t: &Tree) -> u32 {
    let n = t.n();
    let mut adj = vec![Vec::new(); n + 1];
    for v in 2..=n {
        let p = t.parent(v);
        adj[v].push(p);
        adj[p].push(v);
    }
    let sweep = |src: usize| {
        let mut dist = vec![u32::MAX; n + 1];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (1..=n).max_by_key(|&v| dist[v]).map(|v| (v, dist[v])).unwrap()
    };
    sweep(sweep(1).0).1
}

#[test]
fn diameter_bounds_and_oracle() {
    let seq = WeightSequence::constant(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1, 2, 3, 10, 100, 2000] {
        for _ in 0..50 {
            let t = grow_wrt(&seq, n, &mut rng);
            let d = t.diameter();
            assert_eq!(d, diameter_by_bfs(&t));
            assert!(t.height() <= d && d <= 2 * t.height());
        }
    }
}

#[test]
fn collapse_never_increases_height() {
    let seq = WeightSequence::power_law(1.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let t = grow_wrt(&seq, 300, &mut rng);
        for level in [1, 2, 7, 50, 300] {
            let c = t.collapse(level).unwrap();
            assert!(c.height() <= t.height());
            for v in 2..=level {
                assert_eq!(c.parent(v), 1);
            }
        }
    }
}

/// `E[Q]` from the spine: `B_j ~ Bernoulli(q_j)` of the collapsed weights,
/// heights read at the checkpoints.
fn qn_mean_by_recursion(setup: &QnSetup) -> f64 {
    let w = setup.modified.values(setup.n);
    let t = setup.t;
    let target = t as i64 - setup.x_n;
    let mut dist = vec![0.0; setup.n + 2];
    dist[0] = 1.0;
    let mut big_w = w[1];
    let mut next_ck = 1;
    for j in 2..=setup.n {
        big_w += w[j];
        let q = w[j] / big_w;
        for h in (0..=setup.n).rev() {
            let stay = dist[h] * (1.0 - q);
            let up = if h > 0 { dist[h - 1] * q } else { 0.0 };
            dist[h] = stay + up;
        }
        while next_ck <= t && setup.checkpoints.i[next_ck] == j {
            let k = next_ck as i64;
            for (h, v) in dist.iter_mut().enumerate() {
                let early = 2 * k <= t as i64 && h as i64 - k > setup.barrier_k as i64;
                let late = 2 * k >= t as i64 && h as i64 - k > -setup.x_n;
                if early || late {
                    *v = 0.0;
                }
            }
            next_ck += 1;
        }
    }
    (setup.theta * target as f64).exp() * dist[target as usize]
}

#[test]
fn qn_first_moment_matches_recursion() {
    let base = Arc::new(WeightSequence::constant(1.0).unwrap());
    let setup = QnSetup::new(base, 1.0, 3, 2, 12).unwrap();
    let exact = qn_mean_by_recursion(&setup);
    assert!(exact > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reps = 200_000;
    let vals: Vec<f64> = (0..reps).map(|_| qn_sample(&setup, &mut rng).unwrap().q()).collect();
    let m = wrt_core::stats::mean(&vals);
    let se = (wrt_core::stats::variance(&vals) / reps as f64).sqrt();
    assert!((m - exact).abs() <= 4.0 * se, "mean {m} se {se} exact {exact}");
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let out = run_experiment(cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&out.rows, &mut buf).unwrap();
    buf
}

#[test]
fn campaigns_are_reproducible_across_thread_pools() {
    for text in [
        "experiment = tail\nweights = constant:1\nn = 64,128\nreplicas = 300\nseed = 5\nx = 0..3\n",
        "experiment = height\nweights = power:1:0.5\nn = 32,64\nreplicas = 200\nseed = 8\n",
        "experiment = qn\nweights = constant:1\nn = 1\nreplicas = 50\nseed = 2\nK = 2\nN = 3\nt = 12\n",
    ] {
        let cfg = ExperimentConfig::parse(text).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| csv_bytes(&cfg));
        let b = three.install(|| csv_bytes(&cfg));
        assert!(!a.is_empty());
        assert_eq!(a, b);
        assert_eq!(a, csv_bytes(&cfg));
    }
}

