//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature the map runs on the rayon pool; without it, or
//! with [`ExecMode::Sequential`], it is a plain iterator. Results are always
//! returned in input order, so both modes produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
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

/// True when [`ExecMode::Parallel`] actually runs in parallel.
pub const PARALLEL_AVAILABLE: bool = cfg!(feature = "parallel");

pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Sizes the global rayon pool; a no-op without the `parallel` feature.
pub fn configure_workers(workers: usize) {
    #[cfg(feature = "parallel")]
    {
        if workers > 0 {
            // a pool that is already built keeps its size
            let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecMode::Parallel, &xs, |x| x * x + 1);
        let b = map(ExecMode::Sequential, &xs, |x| x * x + 1);
        assert_eq!(a, b);
    }
}
