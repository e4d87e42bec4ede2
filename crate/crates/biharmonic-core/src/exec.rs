//! Execution strategy: data-parallel via rayon, or strictly sequential.
//!
//! Every parallelizable kernel in this crate (Monte-Carlo sharding, atlas
//! sweeps, pencil assembly) is written against [`map_collect`], which
//! preserves output order in both modes. Combined with per-shard RNG streams
//! and ordered reduction, results are bit-identical between
//! [`ExecMode::Parallel`] and [`ExecMode::Sequential`] — the benchmark suite
//! compares the two for speed, the test suite for equality.
//!
//! The `parallel` cargo feature (on by default) gates the rayon dependency.
//! Without it, [`ExecMode::Parallel`] silently degrades to sequential so that
//! callers never need feature-conditional code.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel kernel should run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExecMode {
    /// Single-threaded, deterministic reference path.
    Sequential,
    /// rayon work-stealing path (degrades to sequential when the `parallel`
    /// feature is disabled).
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    /// The mode that will actually run, given the compiled feature set.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            ExecMode::Sequential
        }
    }
}

/// Applies `f` to `0..n` and collects results in index order.
///
/// The parallel path uses rayon's indexed collect, so the output vector is
/// element-for-element identical to the sequential one; any reduction the
/// caller performs over it is therefore order-stable regardless of mode.
pub fn map_collect<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode.effective() {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => unreachable!("effective() removes Parallel without the feature"),
    }
}
