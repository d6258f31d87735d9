//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the mapping runs on the rayon pool;
//! without it every call degrades to a plain iterator. Output order always
//! follows input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn available(self) -> bool {
        matches!(self, Execution::Parallel) && cfg!(feature = "parallel")
    }
}

/// Map `f` over `items`, preserving order.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect(),
        _ => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
    }
}

/// Run `body` with a pool of `workers` threads (or the global pool when `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, body: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = workers {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(body);
            }
        }
        body()
    }
    #[cfg(not(feature = "parallel"))]
    {
        if workers.is_some() {
            log::warn!("built without the `parallel` feature; --workers is ignored");
        }
        body()
    }
}
