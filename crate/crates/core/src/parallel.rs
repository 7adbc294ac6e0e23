//! Data-parallel map over independent jobs. With the `parallel` feature the work runs on
//! the rayon pool, otherwise in order on the calling thread. Results keep input order
//! either way, so output never depends on the backend.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_seq(items, f)
}

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Caps the global worker count. Only the first call has an effect; later calls and
/// builds without the `parallel` feature are no-ops.
pub fn set_thread_cap(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

pub fn backend() -> &'static str {
    if cfg!(feature = "parallel") {
        "rayon"
    } else {
        "sequential"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let v: Vec<u64> = (0..1000).collect();
        let a = map(&v, |x| x * x);
        let b = map_seq(&v, |x| x * x);
        assert_eq!(a, b);
    }
}
