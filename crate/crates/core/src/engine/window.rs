use std::collections::VecDeque;

use crate::lang::AggrFn;
use crate::value::{nan_max, nan_min, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket<F> {
    pub count: u64,
    pub sum: F,
    pub min: F,
    pub max: F,
}

impl<F: Scalar> Bucket<F> {
    pub fn of(v: F) -> Self {
        Bucket { count: 1, sum: v, min: v, max: v }
    }

    pub fn merge(&mut self, o: &Bucket<F>) {
        if self.count == 0 {
            *self = *o;
            return;
        }
        if o.count == 0 {
            return;
        }
        self.count += o.count;
        self.sum = self.sum + o.sum;
        self.min = nan_min(self.min, o.min);
        self.max = nan_max(self.max, o.max);
    }

    pub fn empty() -> Self {
        Bucket { count: 0, sum: F::zero(), min: F::nan(), max: F::nan() }
    }

    pub fn finish(&self, f: AggrFn) -> F {
        match f {
            AggrFn::Count => F::from_u64(self.count).unwrap_or_else(F::nan),
            AggrFn::Sum => self.sum,
            _ if self.count == 0 => F::nan(),
            AggrFn::Min => self.min,
            AggrFn::Max => self.max,
            AggrFn::Avg => (self.sum / F::from_u64(self.count).unwrap_or_else(F::nan)).normalize(),
        }
    }
}

/// Sliding window over `n` buckets of equal width. Bucket `k` holds the
/// values with timestamps in `(start + (k-1)·w, start + k·w]`; a query at
/// time `t` folds the `n` buckets ending with the one containing `t`.
#[derive(Debug, Clone)]
pub struct SlidingWindow<F> {
    start: f64,
    width: f64,
    n: i64,
    buckets: VecDeque<(i64, Bucket<F>)>,
}

impl<F: Scalar> SlidingWindow<F> {
    pub fn new(start: f64, duration: f64, n: u64) -> Self {
        assert!(n >= 1 && duration > 0.0);
        SlidingWindow { start, width: duration / n as f64, n: n as i64, buckets: VecDeque::new() }
    }

    fn index(&self, t: f64) -> i64 {
        let x = (t - self.start) / self.width;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
            r as i64
        } else {
            x.ceil() as i64
        }
    }

    fn evict(&mut self, k: i64) {
        while self.buckets.front().is_some_and(|(i, _)| *i <= k - self.n) {
            self.buckets.pop_front();
        }
    }

    pub fn push(&mut self, t: f64, v: F) {
        let k = self.index(t);
        self.evict(k);
        match self.buckets.back_mut() {
            Some((i, b)) if *i == k => b.merge(&Bucket::of(v)),
            Some((i, _)) if *i > k => panic!("window push out of order"),
            _ => self.buckets.push_back((k, Bucket::of(v))),
        }
        debug_assert!(self.buckets.len() as i64 <= self.n);
    }

    pub fn fold(&self, t: f64) -> Bucket<F> {
        let k = self.index(t);
        let mut acc = Bucket::empty();
        for (i, b) in &self.buckets {
            if *i > k - self.n && *i <= k {
                acc.merge(b);
            }
        }
        acc
    }

    pub fn query(&self, t: f64, f: AggrFn) -> F {
        self.fold(t).finish(f)
    }

    pub fn occupied(&self) -> usize {
        self.buckets.len()
    }

    pub fn capacity(&self) -> usize {
        self.n as usize
    }
}
