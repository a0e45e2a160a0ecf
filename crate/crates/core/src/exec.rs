//! Sequential or data-parallel execution of independent work items.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool; without it every request runs sequentially. Results
//! are always returned in index order, so reductions over them do not depend
//! on the execution mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(lo..hi).map(f).collect()`, possibly in parallel.
    pub fn map_range<T, F>(self, lo: u64, hi: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (lo..hi).into_par_iter().map(f).collect();
        }
        (lo..hi).map(f).collect()
    }

    /// `items.iter().map(f).collect()`, possibly in parallel.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: u64| (i * i) as f64 / 7.0;
        assert_eq!(
            Execution::Sequential.map_range(0, 1000, f),
            Execution::Parallel.map_range(0, 1000, f)
        );
        let items: Vec<u32> = (0..100).collect();
        assert_eq!(
            Execution::Sequential.map_slice(&items, |x| x + 1),
            Execution::Parallel.map_slice(&items, |x| x + 1)
        );
    }
}
