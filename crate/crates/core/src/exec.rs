//! Execution strategy for data-parallel sweeps.
//!
//! Every sweep in this crate maps an index range through a pure function, so
//! parallelism never changes results: element `i` of the output depends only
//! on `i`. With the `parallel` feature enabled [`indexed_map`] runs on the
//! rayon pool; without it the call degrades to the sequential loop.
//! [`indexed_map_seq`] is always the plain loop and exists so benchmarks can
//! compare the two paths directly.

/// Maps `f` over `0..n`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving index order in the output.
#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    indexed_map_seq(n, f)
}

/// Sequential reference path for [`indexed_map`].
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_elementwise() {
        let par = indexed_map(257, |i| i * i);
        let seq = indexed_map_seq(257, |i| i * i);
        assert_eq!(par, seq);
    }
}
