//! Recursive trees stored as flat label-indexed arrays, their growth under
//! the weighted recursive and preferential attachment rules, and exact
//! enumeration for small sizes.
//!
//! Labels run from 1 to `n`; index 0 of every array is an unused slot so
//! that array positions and labels coincide. Parents always carry a smaller
//! label than their children.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::fenwick::Fenwick;
use crate::weights::{FitnessSequence, WeightSequence};

/// Largest size handled by [`enumerate_wrt`]; `(n - 1)!` trees are listed.
pub const MAX_ENUMERATION: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    parent: Vec<u32>,
    height: Vec<u32>,
    outdeg: Vec<u32>,
}

impl Default for Tree {
    fn default() -> Self {
        Self::new()
    }
}

impl Tree {
    /// The single-vertex tree.
    pub fn new() -> Self {
        Self::with_capacity(1)
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut parent = Vec::with_capacity(n + 1);
        let mut height = Vec::with_capacity(n + 1);
        let mut outdeg = Vec::with_capacity(n + 1);
        parent.extend([0, 0]);
        height.extend([0, 0]);
        outdeg.extend([0, 0]);
        Tree {
            parent,
            height,
            outdeg,
        }
    }

    /// Builds a tree from the parents of labels `2..=n`.
    pub fn from_parents(parents: &[u32]) -> Result<Self> {
        let mut t = Tree::with_capacity(parents.len() + 1);
        for (idx, &p) in parents.iter().enumerate() {
            let label = idx + 2;
            if p == 0 || p as usize >= label {
                return Err(Error::InvalidParameter(format!(
                    "parent {p} of label {label} must lie in 1..{label}"
                )));
            }
            t.push(p);
        }
        Ok(t)
    }

    /// Appends vertex `n + 1` as a child of `parent`.
    #[inline]
    pub fn push(&mut self, parent: u32) {
        let p = parent as usize;
        debug_assert!(p >= 1 && p < self.parent.len());
        self.parent.push(parent);
        self.height.push(self.height[p] + 1);
        self.outdeg.push(0);
        self.outdeg[p] += 1;
    }

    pub fn n(&self) -> usize {
        self.parent.len() - 1
    }

    /// Parent label; 0 for the root.
    pub fn parent(&self, label: usize) -> usize {
        self.parent[label] as usize
    }

    pub fn vertex_height(&self, label: usize) -> u32 {
        self.height[label]
    }

    pub fn outdeg(&self, label: usize) -> u32 {
        self.outdeg[label]
    }

    /// Parents of labels `2..=n`.
    pub fn parents(&self) -> &[u32] {
        &self.parent[2..]
    }

    /// Heights of labels `1..=n`.
    pub fn heights(&self) -> &[u32] {
        &self.height[1..]
    }

    pub fn height(&self) -> u32 {
        self.height[1..].iter().copied().max().unwrap_or(0)
    }

    /// Longest path length, from the two deepest child subtrees of each vertex.
    pub fn diameter(&self) -> u32 {
        let n = self.n();
        let mut best1 = vec![0u32; n + 1];
        let mut best2 = vec![0u32; n + 1];
        let mut diam = 0;
        for c in (2..=n).rev() {
            diam = diam.max(best1[c] + best2[c]);
            let p = self.parent[c] as usize;
            let cand = best1[c] + 1;
            if cand > best1[p] {
                best2[p] = best1[p];
                best1[p] = cand;
            } else if cand > best2[p] {
                best2[p] = cand;
            }
        }
        diam.max(best1[1] + best2[1])
    }

    /// Label of the most recent common ancestor of `u` and `v`.
    pub fn mrca(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if u > v {
                u = self.parent[u] as usize;
            } else {
                v = self.parent[v] as usize;
            }
        }
        u
    }

    /// Most recent ancestor of `u` (possibly `u` itself) with label `<= k`.
    pub fn ancestor_at(&self, mut u: usize, k: usize) -> usize {
        while u > k {
            u = self.parent[u] as usize;
        }
        u
    }

    /// `(h(u(1)), ..., h(u(n)))`: position `k - 1` holds the height of the
    /// most recent ancestor of `u` with label at most `k`.
    pub fn trajectory(&self, u: usize) -> Vec<u32> {
        let n = self.n();
        let mut chain = Vec::with_capacity(self.height[u] as usize + 1);
        let mut v = u;
        while v != 0 {
            chain.push(v);
            v = self.parent[v] as usize;
        }
        chain.reverse();
        let mut out = Vec::with_capacity(n);
        let mut idx = 0;
        for k in 1..=n {
            while idx + 1 < chain.len() && chain[idx + 1] <= k {
                idx += 1;
            }
            out.push(self.height[chain[idx]]);
        }
        out
    }

    /// Re-attaches labels `2..=level` and every child of a vertex in
    /// `1..=level` directly to the root. Labels are kept; heights recomputed.
    pub fn collapse(&self, level: usize) -> Result<Tree> {
        let n = self.n();
        if level == 0 || level > n {
            return Err(Error::CollapseOutOfRange { level, n });
        }
        let mut t = Tree::with_capacity(n);
        for c in 2..=n {
            let p = self.parent[c] as usize;
            t.push(if p <= level { 1 } else { p as u32 });
        }
        Ok(t)
    }

    /// Parent-array text: the size, then the parents of `2..=n` on one line.
    pub fn write_parent_array<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.n())?;
        let mut line = String::with_capacity(8 * self.n());
        for (i, p) in self.parents().iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&p.to_string());
        }
        writeln!(out, "{line}")
    }

    pub fn read_parent_array<R: BufRead>(input: R) -> Result<Tree> {
        let mut tokens = Vec::new();
        let mut n: Option<usize> = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if n.is_none() {
                n = Some(line.parse().map_err(|e| Error::Parse {
                    line: idx + 1,
                    msg: format!("size: {e}"),
                })?);
                continue;
            }
            for tok in line.split_whitespace() {
                tokens.push(tok.parse::<u32>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    msg: format!("parent `{tok}`: {e}"),
                })?);
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            msg: "missing size".into(),
        })?;
        if n == 0 || tokens.len() != n - 1 {
            return Err(Error::Parse {
                line: 2,
                msg: format!("expected {} parents for n = {n}, got {}", n.saturating_sub(1), tokens.len()),
            });
        }
        Tree::from_parents(&tokens)
    }
}

/// Samples a label in `1..=m` with probability `w_k / W_m` from prefix sums.
#[inline]
pub(crate) fn sample_by_prefix<R: Rng + ?Sized>(prefix: &[f64], m: usize, rng: &mut R) -> usize {
    let x = rng.random::<f64>() * prefix[m];
    let idx = prefix[1..=m].partition_point(|&p| p <= x);
    if idx < m {
        return idx + 1;
    }
    // u * W_m rounded up to W_m: fall back to the last label with mass.
    let mut k = m;
    while k > 1 && prefix[k] == prefix[k - 1] {
        k -= 1;
    }
    k
}

/// Grows `T_n` under WRT(w): vertex `m + 1` picks parent `k` with
/// probability `w_k / W_m`.
pub fn grow_wrt<R: Rng + ?Sized>(seq: &WeightSequence, n: usize, rng: &mut R) -> Tree {
    assert!(n >= 1, "trees have at least one vertex");
    let mut t = Tree::with_capacity(n);
    if seq.is_constant() {
        for m in 1..n {
            t.push(rng.random_range(1..=m as u32));
        }
    } else {
        let prefix = seq.prefix_sums(n);
        for m in 1..n {
            t.push(sample_by_prefix(&prefix, m, rng) as u32);
        }
    }
    t
}

/// Height of a WRT(w) tree without keeping the tree, for campaigns that only
/// need the maximum. `scratch` is reused between calls.
pub fn wrt_height<R: Rng + ?Sized>(seq: &WeightSequence, n: usize, scratch: &mut Vec<u32>, rng: &mut R) -> u32 {
    scratch.clear();
    scratch.resize(n + 1, 0);
    let mut max = 0;
    if seq.is_constant() {
        for m in 1..n {
            let p = rng.random_range(1..=m);
            let h = scratch[p] + 1;
            scratch[m + 1] = h;
            max = max.max(h);
        }
    } else {
        let prefix = seq.prefix_sums(n);
        for m in 1..n {
            let p = sample_by_prefix(&prefix, m, rng);
            let h = scratch[p] + 1;
            scratch[m + 1] = h;
            max = max.max(h);
        }
    }
    max
}

/// Grows `P_n` under PAT(a): vertex `m + 1` picks parent `k` with
/// probability `(outdeg_k + a_k) / (m - 1 + A_m)`; vertex 2 always attaches
/// to the root.
pub fn grow_pat<R: Rng + ?Sized>(fit: &FitnessSequence, n: usize, rng: &mut R) -> Tree {
    assert!(n >= 1, "trees have at least one vertex");
    let a = fit.values(n);
    let mut t = Tree::with_capacity(n);
    let mut index = Fenwick::new(n);
    index.add(0, a[1]);
    if n >= 2 {
        t.push(1);
        index.add(0, 1.0);
        index.add(1, a[2]);
    }
    for m in 2..n {
        let x = rng.random::<f64>() * index.total();
        let k = index.find(x) + 1;
        t.push(k as u32);
        index.add(k - 1, 1.0);
        index.add(m, a[m + 1]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedTree {
    pub tree: Tree,
    pub probability: f64,
}

/// Every recursive tree on `n` vertices with its probability
/// `prod_{m=2}^{n} w_{parent(m)} / W_{m-1}` under WRT(w), in lexicographic
/// order of parent arrays.
pub fn enumerate_wrt(seq: &WeightSequence, n: usize) -> Result<Vec<EnumeratedTree>> {
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_ENUMERATION,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("trees have at least one vertex".into()));
    }
    let w = seq.values(n);
    let prefix = seq.prefix_sums(n);
    let mut out = Vec::new();
    let mut parents = vec![0u32; n.saturating_sub(1)];
    fn rec(
        depth: usize,
        n: usize,
        prob: f64,
        parents: &mut [u32],
        w: &[f64],
        prefix: &[f64],
        out: &mut Vec<EnumeratedTree>,
    ) {
        let label = depth + 2;
        if label > n {
            out.push(EnumeratedTree {
                tree: Tree::from_parents(parents).expect("enumerated parents are valid"),
                probability: prob,
            });
            return;
        }
        let m = label - 1;
        for k in 1..=m {
            parents[depth] = k as u32;
            rec(depth + 1, n, prob * w[k] / prefix[m], parents, w, prefix, out);
        }
    }
    rec(0, n, 1.0, &mut parents, &w, &prefix, &mut out);
    Ok(out)
}
