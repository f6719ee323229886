//! Binary sum tree over nonnegative weights: O(log n) point updates and
//! proportional sampling.
//!
//! Parents are recomputed from their children on every update rather than
//! adjusted by deltas, so the root is always the exact tree-ordered sum of
//! the current leaves.

use crate::real::Real;

#[derive(Clone, Debug)]
pub struct SumTree<T> {
    len: usize,
    capacity: usize,
    // Node 1 is the root; leaves occupy [capacity, 2 * capacity).
    nodes: Vec<T>,
}

impl<T: Real> SumTree<T> {
    pub fn new(len: usize) -> Self {
        let capacity = len.max(1).next_power_of_two();
        Self {
            len,
            capacity,
            nodes: vec![T::zero(); 2 * capacity],
        }
    }

    pub fn from_weights(weights: &[T]) -> Self {
        let mut tree = Self::new(weights.len());
        tree.nodes[tree.capacity..tree.capacity + weights.len()].copy_from_slice(weights);
        tree.rebuild();
        tree
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn total(&self) -> T {
        self.nodes[1]
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        self.nodes[self.capacity + i]
    }

    pub fn leaves(&self) -> &[T] {
        &self.nodes[self.capacity..self.capacity + self.len]
    }

    #[inline]
    pub fn update(&mut self, i: usize, weight: T) {
        debug_assert!(i < self.len);
        debug_assert!(weight >= T::zero());
        let mut node = self.capacity + i;
        if self.nodes[node] == weight {
            return;
        }
        self.nodes[node] = weight;
        while node > 1 {
            node >>= 1;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Recompute every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.capacity).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf `i` such that the prefix sum before `i` is at most `target` and
    /// the prefix through `i` exceeds it. Never returns a zero-weight leaf
    /// while the total is positive, even when rounding pushes `target` to
    /// the total.
    pub fn find(&self, mut target: T) -> usize {
        let mut node = 1;
        while node < self.capacity {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            if left > T::zero() && (target < left || !(right > T::zero())) {
                node *= 2;
            } else {
                target = target - left;
                node = 2 * node + 1;
            }
        }
        node - self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn totals_and_find() {
        let mut t = SumTree::<f64>::new(8);
        for i in 0..8 {
            t.update(i, i as f64);
        }
        assert_eq!(t.total(), 28.0);
        assert_eq!(t.find(0.0), 1);
        assert_eq!(t.find(4.0), 3);
        assert_eq!(t.find(18.0), 6);
        assert_eq!(t.find(27.999), 7);
        // target at/over the total still lands on a positive leaf
        assert_eq!(t.find(28.0), 7);
        t.update(7, 0.0);
        assert_eq!(t.find(21.0), 6);
    }

    #[test]
    fn non_power_of_two_length() {
        let t = SumTree::from_weights(&[1.0f32, 0.0, 2.0]);
        assert_eq!(t.len(), 3);
        assert_eq!(t.total(), 3.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
    }

    proptest! {
        #[test]
        fn incremental_updates_match_rebuild(
            init in proptest::collection::vec(0.0f64..10.0, 1..64),
            updates in proptest::collection::vec((0usize..64, 0.0f64..10.0), 0..200)
        ) {
            let mut t = SumTree::from_weights(&init);
            for (i, w) in updates {
                t.update(i % init.len(), w);
            }
            let mut fresh = t.clone();
            fresh.rebuild();
            prop_assert_eq!(t.total(), fresh.total());
            let direct: f64 = t.leaves().iter().sum();
            prop_assert!((t.total() - direct).abs() <= 1e-12 * direct.max(1.0));
        }

        #[test]
        fn find_lands_on_positive_weight(
            w in proptest::collection::vec(prop_oneof![Just(0.0f64), 0.0f64..5.0], 1..40),
            u in 0.0f64..=1.0
        ) {
            let t = SumTree::from_weights(&w);
            prop_assume!(t.total() > 0.0);
            let i = t.find(u * t.total());
            prop_assert!(i < w.len());
            prop_assert!(w[i] > 0.0);
        }
    }
}
