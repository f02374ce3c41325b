//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces output in input order (or an order-independent
//! reduction), so results never depend on the execution mode. Without the
//! `parallel` feature, [`Exec::Parallel`] silently runs sequentially.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

static DEFAULT_MODE: AtomicU8 = AtomicU8::new(1);

impl Exec {
    /// Process-wide default mode (parallel unless changed).
    pub fn current() -> Exec {
        match DEFAULT_MODE.load(Ordering::Relaxed) {
            0 => Exec::Sequential,
            _ => Exec::Parallel,
        }
    }

    pub fn set_current(mode: Exec) {
        let v = match mode {
            Exec::Sequential => 0,
            Exec::Parallel => 1,
        };
        DEFAULT_MODE.store(v, Ordering::Relaxed);
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over `0..len`, preserving order.
    pub fn map_range<R, F>(self, len: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Sums `f` over `0..len`.
    pub fn sum_range<F>(self, len: u64, f: F) -> u128
    where
        F: Fn(u64) -> u128 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).sum();
        }
        (0..len).map(f).sum()
    }

    /// Keeps the items for which `keep` holds, preserving order.
    pub fn filter<T, F>(self, items: &[T], keep: F) -> Vec<T>
    where
        T: Sync + Send + Clone,
        F: Fn(&T) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().filter(|t| keep(t)).cloned().collect();
        }
        items.iter().filter(|t| keep(t)).cloned().collect()
    }

    /// Concatenates the per-item outputs of `f`, preserving order.
    pub fn flat_map_range<R, F>(self, len: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> Vec<R> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            let chunks: Vec<Vec<R>> = (0..len).into_par_iter().map(f).collect();
            return chunks.into_iter().flatten().collect();
        }
        (0..len).flat_map(f).collect()
    }
}
