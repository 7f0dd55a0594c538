//! Thread control.
//!
//! `MBIRLAB_THREADS` caps the worker count; `0` selects the serial reference
//! path. Every parallel helper here produces results in index order and never
//! reduces across workers, so serial and parallel runs are bit-identical.

use rayon::prelude::*;
use std::sync::OnceLock;

static THREADS: OnceLock<usize> = OnceLock::new();

/// Worker cap read once from `MBIRLAB_THREADS` (unset means "rayon default").
pub fn thread_cap() -> Option<usize> {
    let cap = *THREADS.get_or_init(|| {
        let cap = std::env::var("MBIRLAB_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(usize::MAX);
        if cap != 0 && cap != usize::MAX {
            // Ignore the error: the global pool may already be initialised.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(cap).build_global();
        }
        cap
    });
    (cap != usize::MAX).then_some(cap)
}

pub fn is_serial() -> bool {
    thread_cap() == Some(0)
}

/// `(0..n).map(f).collect()`, possibly spread over the rayon pool.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if is_serial() || n < 2 {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Applies `f` to each `chunk`-sized piece of `out` together with its index.
pub fn for_each_chunk<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if is_serial() {
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    } else {
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}
