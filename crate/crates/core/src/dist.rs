//! Empirical categorical distributions.
//!
//! The tree, graph and schema samplers all reduce their training data to
//! count histograms and resample from them. [`Empirical`] keeps counts in
//! a `BTreeMap` so iteration order, and therefore sampling given a seed,
//! is deterministic.

use std::collections::BTreeMap;

use rand::Rng;

/// Count histogram over an ordered key type, sampled as a categorical.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Empirical<T: Ord + Clone> {
    counts: BTreeMap<T, u64>,
    total: u64,
}

impl<T: Ord + Clone> Empirical<T> {
    pub fn new() -> Self {
        Self { counts: BTreeMap::new(), total: 0 }
    }

    pub fn add(&mut self, value: T) {
        self.add_n(value, 1);
    }

    pub fn add_n(&mut self, value: T, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(value).or_insert(0) += n;
        self.total += n;
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Normalized probability of `value` (0 for unseen values).
    pub fn prob(&self, value: &T) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(value).unwrap_or(&0) as f64 / self.total as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    /// Draw one value proportionally to its count. Panics on an empty
    /// histogram; callers guard with [`Empirical::is_empty`].
    pub fn sample<R: Rng>(&self, rng: &mut R) -> T {
        assert!(self.total > 0, "sample from empty histogram");
        let mut x = rng.gen_range(0..self.total);
        for (value, count) in &self.counts {
            if x < *count {
                return value.clone();
            }
            x -= count;
        }
        unreachable!("cumulative walk exhausted histogram")
    }

    /// Total variation distance to another histogram over the same key space.
    pub fn tv_distance(&self, other: &Empirical<T>) -> f64 {
        let mut keys: Vec<&T> = self.counts.keys().collect();
        keys.extend(other.counts.keys());
        keys.sort();
        keys.dedup();
        0.5 * keys
            .into_iter()
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }
}

impl<T: Ord + Clone> FromIterator<T> for Empirical<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut d = Empirical::new();
        for v in iter {
            d.add(v);
        }
        d
    }
}
