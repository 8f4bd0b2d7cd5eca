//! Execution strategy for the data-parallel loops (Hankel assembly, batched
//! Markov extraction, long-horizon correlation sums).
//!
//! Every parallel code path in this crate splits its work into pieces whose
//! boundaries do not depend on the thread count and reduces the partial
//! results in a fixed order, so `Sequential` and `Parallel` return
//! bit-identical results. Without the `parallel` feature, `Parallel` falls
//! back to sequential evaluation.

/// Samples per chunk for long-horizon sums. Fixed so that chunk boundaries
/// (and therefore floating-point summation order) never depend on the
/// number of worker threads.
pub const CHUNK_LEN: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work on more than one thread.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Maps `f` over `0..len`, preserving order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    /// Fallible variant of [`Execution::map`]; returns the first error in
    /// index order.
    pub fn try_map<T, E, F>(self, len: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Send + Sync,
    {
        self.map(len, f).into_iter().collect()
    }

    /// Splits `0..len` into fixed-size chunks, evaluates `chunk` on each
    /// range and folds the partial results left to right with `combine`.
    pub fn chunked_reduce<T, F, C>(self, len: usize, init: T, chunk: F, combine: C) -> T
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Send + Sync,
        C: Fn(T, T) -> T,
    {
        let n_chunks = len.div_ceil(CHUNK_LEN);
        let partials = self.map(n_chunks, |c| {
            let start = c * CHUNK_LEN;
            chunk(start..(start + CHUNK_LEN).min(len))
        });
        partials.into_iter().fold(init, combine)
    }
}

/// Thread count requested through `SWITCHID_THREADS`, if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SWITCHID_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Configures the global rayon pool from `SWITCHID_THREADS`. Returns the
/// thread cap applied, if any. Harmless when called more than once.
pub fn init_thread_pool_from_env() -> Option<usize> {
    let n = threads_from_env()?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Some(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let seq = Execution::Sequential.map(1000, |i| i * i);
        let par = Execution::Parallel.map(1000, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }

    #[test]
    fn chunked_reduce_is_bit_identical() {
        let xs: Vec<f64> = (0..50_000).map(|i| ((i as f64) * 0.37).sin() / 3.0).collect();
        let sum = |exec: Execution| {
            exec.chunked_reduce(
                xs.len(),
                0.0,
                |r| xs[r].iter().sum::<f64>(),
                |a, b| a + b,
            )
        };
        assert_eq!(
            sum(Execution::Sequential).to_bits(),
            sum(Execution::Parallel).to_bits()
        );
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> =
            Execution::Parallel.try_map(100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}
