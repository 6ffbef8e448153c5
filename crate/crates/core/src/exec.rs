//! Execution mode for the data-parallel loops (Monte Carlo pairs, sample
//! batches, oracle sweeps).
//!
//! Work items are indexed and every item derives its own seed from its
//! index, so both modes return identical, index-ordered results. Without the
//! `parallel` feature, [`Exec::Parallel`] runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether [`Exec::Parallel`] actually uses worker threads in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fallible variant of [`Exec::map_indexed`]; reports the error of the
    /// lowest failing index.
    pub fn try_map_indexed<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map_indexed(n, f).into_iter().collect()
    }
}
