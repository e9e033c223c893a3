//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! rayon global pool. Without it every call degrades to a plain iterator, so
//! results are identical either way; only wall time changes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel kernel should be executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    /// True when this build can actually run work in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over a slice, preserving order.
    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Fills `out` in chunks of `chunk` elements; `f` receives the chunk index.
    pub fn for_each_chunk_mut<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }

    /// Runs `produce(i)` for `i in 0..n` on up to `workers` threads and hands
    /// each result to `sink` on the calling thread in index order, as soon as
    /// all earlier results have been sunk.
    pub fn ordered_for_each<T, P, S>(self, n: usize, workers: usize, produce: P, mut sink: S)
    where
        T: Send,
        P: Fn(usize) -> T + Sync + Send,
        S: FnMut(usize, T),
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && workers > 1 && n > 1 {
            use std::collections::BTreeMap;
            use std::sync::mpsc;

            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool construction");
            let (tx, rx) = mpsc::channel::<(usize, T)>();
            std::thread::scope(|scope| {
                let produce = &produce;
                let pool = &pool;
                scope.spawn(move || {
                    pool.install(|| {
                        (0..n).into_par_iter().for_each_with(tx, |tx, i| {
                            // The receiver lives until every index is sunk.
                            let _ = tx.send((i, produce(i)));
                        })
                    })
                });
                let mut pending = BTreeMap::new();
                let mut next = 0;
                for (i, item) in rx.iter() {
                    pending.insert(i, item);
                    while let Some(item) = pending.remove(&next) {
                        sink(next, item);
                        next += 1;
                    }
                }
            });
            return;
        }
        let _ = workers;
        for i in 0..n {
            sink(i, produce(i));
        }
    }
}
