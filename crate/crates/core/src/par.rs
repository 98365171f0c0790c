//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction here is keyed by an index so the result is identical
//! whether the `parallel` feature is enabled or not.

use std::cmp::Ordering;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for the enumeration and Monte-Carlo loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    /// Parallel when the `parallel` feature is compiled in.
    #[default]
    Auto,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Auto
    }
}

/// Evaluates `f` on `0..n` and keeps the best candidate under `cmp`
/// (`Ordering::Greater` means the left argument is better). Equal candidates
/// resolve to the smaller index.
pub fn best_by<T, F, C>(n: u64, exec: Exec, f: F, cmp: C) -> Option<T>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
    C: Fn(&T, &T) -> Ordering + Sync + Send,
{
    let pick = |a: Option<(u64, T)>, b: Option<(u64, T)>| -> Option<(u64, T)> {
        match (a, b) {
            (None, b) => b,
            (a, None) => a,
            (Some(a), Some(b)) => match cmp(&a.1, &b.1) {
                Ordering::Greater => Some(a),
                Ordering::Less => Some(b),
                Ordering::Equal => {
                    if a.0 <= b.0 {
                        Some(a)
                    } else {
                        Some(b)
                    }
                }
            },
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(|i| f(i).map(|v| (i, v))).reduce(|| None, pick).map(|(_, v)| v);
    }
    let _ = exec;
    (0..n).map(|i| f(i).map(|v| (i, v))).fold(None, pick).map(|(_, v)| v)
}

/// Maps `0..n` through `f` and collects in index order.
pub fn map_collect<T, F>(n: usize, exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// True when `pred` holds for every index.
pub fn all<F>(n: u64, exec: Exec, pred: F) -> bool
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().all(pred);
    }
    let _ = exec;
    (0..n).all(pred)
}
