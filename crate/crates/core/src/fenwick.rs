/// Fenwick tree over nonnegative `f64` masses supporting point updates and
/// sampling an index proportionally to its mass, both in `O(log n)`.
#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<f64>,
    total: f64,
}

impl Fenwick {
    pub fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![0.0; len + 1],
            total: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Adds `delta` to the mass at 0-based `index`.
    pub fn add(&mut self, index: usize, delta: f64) {
        self.total += delta;
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of masses at `0..=index`.
    pub fn prefix(&self, index: usize) -> f64 {
        let mut i = index + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest 0-based index whose inclusive prefix exceeds `target`.
    /// `target` must lie in `[0, total)`; the result is clamped to the last
    /// index with positive mass so rounding never yields an empty slot.
    pub fn find(&self, mut target: f64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_and_find() {
        let mut f = Fenwick::new(5);
        for (i, w) in [1.0, 0.0, 2.0, 3.0, 0.5].iter().enumerate() {
            f.add(i, *w);
        }
        assert_eq!(f.total(), 6.5);
        assert_eq!(f.prefix(2), 3.0);
        assert_eq!(f.find(0.0), 0);
        assert_eq!(f.find(0.99), 0);
        assert_eq!(f.find(1.0), 2);
        assert_eq!(f.find(2.999), 2);
        assert_eq!(f.find(3.0), 3);
        assert_eq!(f.find(6.4), 4);
    }

    #[test]
    fn find_skips_zero_mass() {
        let mut f = Fenwick::new(8);
        f.add(7, 1.0);
        assert_eq!(f.find(0.0), 7);
        assert_eq!(f.find(0.5), 7);
    }
}
