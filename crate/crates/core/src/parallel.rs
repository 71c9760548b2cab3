//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) loops run on rayon; without it they
//! run on plain iterators. Results are always collected in index order and
//! reduced with a fixed summation tree, so outputs are byte-identical across
//! worker counts.

/// How many workers a sweep may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Everything on the calling thread.
    Sequential,
    /// A dedicated pool with this many workers.
    Threads(usize),
    /// Rayon's global pool.
    #[default]
    Auto,
}

impl Parallelism {
    /// Reads a worker count from the environment variable `var`; unset or
    /// unparsable values mean [`Parallelism::Auto`].
    pub fn from_env(var: &str) -> Self {
        match std::env::var(var)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            Some(0) | None => Parallelism::Auto,
            Some(1) => Parallelism::Sequential,
            Some(n) => Parallelism::Threads(n),
        }
    }

    /// Runs `job` under this parallelism level.
    pub fn install<R: Send>(self, job: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        {
            let threads = match self {
                Parallelism::Auto => return job(),
                Parallelism::Sequential => 1,
                Parallelism::Threads(n) => n.max(1),
            };
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(job),
                Err(e) => {
                    log::warn!(
                        "could not build a {threads}-thread pool ({e}); using the global pool"
                    );
                    job()
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = self;
            job()
        }
    }
}

/// Maps `f` over `0..n`, keeping index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().with_min_len(64).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, keeping order. Each item is treated as a coarse job.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Pairwise summation with a fixed tree shape.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
