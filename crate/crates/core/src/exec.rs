//! Serial or data-parallel mapping over independent jobs.
//!
//! Results always come back in input order, so the choice of execution mode
//! never changes what a caller observes. Without the `parallel` feature,
//! [`Execution::Parallel`] silently runs serially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when jobs actually run on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every item, preserving order.
pub fn map_ordered<T, R, F>(items: Vec<T>, exec: Execution, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let serial = map_ordered(items.clone(), Execution::Serial, |x| x * x);
        let parallel = map_ordered(items, Execution::Parallel, |x| x * x);
        assert_eq!(serial, parallel);
        assert_eq!(serial[31], 961);
    }
}
