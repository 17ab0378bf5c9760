//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) [`Exec::Auto`] fans work out on the
//! rayon pool; without it everything runs on the calling thread. Results are
//! always collected in input order and callers reduce them sequentially, so
//! outputs are bitwise identical in both modes.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
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

/// Maps `f` over `items`, preserving order.
pub fn map_collect<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Like [`map_collect`] but short-circuits on the first error (in input order
/// for the sequential path; any error for the parallel one).
pub fn try_map_collect<T, R, E, F>(exec: Exec, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_collect(Exec::Auto, &xs, |x| x * x);
        let b = map_collect(Exec::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
    }

    #[test]
    fn try_map_reports_error() {
        let xs = [1, 2, 3];
        let r: Result<Vec<i32>, String> =
            try_map_collect(
                Exec::Sequential,
                &xs,
                |&x| if x == 2 { Err("two".into()) } else { Ok(x) },
            );
        assert_eq!(r.unwrap_err(), "two");
    }
}
