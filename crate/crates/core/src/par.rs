//! Data-parallel helpers. Replications, sample collection and ablation
//! variants are independent jobs; with the `parallel` feature they fan out
//! over rayon, otherwise they run in order on the calling thread. Results
//! always come back in input order, so outputs do not depend on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    /// Whether this mode actually fans out (false when built without `parallel`).
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fallible variant of [`map_range`]; the first error in input order wins.
pub fn try_map_range<R, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    map_range(exec, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let square = |i: usize| (i * i) as u64;
        let a = map_range(Exec::Parallel, 1000, square);
        let b = map_range(Exec::Sequential, 1000, square);
        assert_eq!(a, b);
        assert_eq!(a[31], 961);
    }

    #[test]
    fn first_error_in_order() {
        let r: Result<Vec<usize>, usize> =
            try_map_range(Exec::Parallel, 100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}
