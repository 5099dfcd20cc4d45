//! Sequential / parallel execution of the data-parallel inner loops.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for order-stable reductions.
const REDUCE_CHUNK: usize = 4096;

/// How batch loops (per curve, per grid cell) are executed.
///
/// `Parallel` silently degrades to sequential execution when the crate is
/// built without the `parallel` feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when loops will actually run on the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f).collect()`, in index order regardless of mode.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Overwrites `out[i] = f(i)`.
    pub fn fill<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }

    /// Sum of `f(i)` over `0..n`.
    ///
    /// The reduction tree is fixed (contiguous chunks summed left to right,
    /// then the chunk sums left to right), so the result is bit-identical
    /// between sequential and parallel runs and across thread counts.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunks = n.div_ceil(REDUCE_CHUNK);
        let partial = self.map(chunks, |c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        });
        partial.iter().sum()
    }

    /// Sum of `f(i)` over `0..n` using the pool's own reduction order.
    ///
    /// Faster than [`Execution::sum`] on many threads but not reproducible
    /// bit for bit.
    pub fn sum_unordered<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).sum();
        }
        (0..n).map(f).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_index_order() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let v = exec.map(10_000, |i| i * 2);
            assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        }
    }

    #[test]
    fn sum_is_bit_identical_across_modes() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let a = Execution::Sequential.sum(100_003, f);
        let b = Execution::Parallel.sum(100_003, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(Execution::Parallel.sum(0, |_| 1.0), 0.0);
    }
}
