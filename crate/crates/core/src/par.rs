//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature disabled every call runs sequentially no matter
//! which [`Parallelism`] is requested.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// What will actually run given the compiled feature set.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Parallelism::Sequential
        }
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(mode: Parallelism, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(mode: Parallelism, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
        _ => data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
    }
}

/// Caps the global worker pool. Returns false if the pool was already built
/// (or the crate was compiled without parallelism).
pub fn limit_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Parallelism::Sequential, &xs, |x| x * x);
        let b = map(Parallelism::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(map_range(Parallelism::Parallel, 5, |i| i + 1), vec![1, 2, 3, 4, 5]);

        let mut s = vec![0usize; 12];
        let mut p = vec![0usize; 12];
        for_each_chunk_mut(Parallelism::Sequential, &mut s, 4, |i, c| c.iter_mut().for_each(|x| *x = i));
        for_each_chunk_mut(Parallelism::Parallel, &mut p, 4, |i, c| c.iter_mut().for_each(|x| *x = i));
        assert_eq!(s, p);
        assert_eq!(s[11], 2);
    }
}
