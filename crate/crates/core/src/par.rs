//! Data-parallel helpers. With the `parallel` feature these run on rayon;
//! without it, or when a caller asks for a single job, they fall back to
//! plain sequential iteration. Output order always matches input order.

/// Degree of parallelism requested by a caller. `0` means "use the default
/// rayon pool"; `1` forces the sequential path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Jobs(pub usize);

impl Jobs {
    pub const SEQUENTIAL: Jobs = Jobs(1);

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(jobs: Jobs, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_min(jobs, 2, items, f)
}

/// Like [`map`], but stays sequential for fewer than `min_len` items, where
/// dispatch would cost more than the work.
pub fn map_min<T, R, F>(jobs: Jobs, min_len: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !jobs.is_sequential() && items.len() >= min_len {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = (jobs, min_len);
    items.iter().map(f).collect()
}

/// Runs `f` inside a pool sized by `jobs` (no-op wrapper when sequential or
/// when the default pool is requested).
pub fn install<R: Send>(jobs: Jobs, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs.0 > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs.0).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}
