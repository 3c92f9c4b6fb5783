//! Bounded worker pool for embarrassingly parallel batch work.
//!
//! `DEXFIT_THREADS` caps the number of workers; results always come back
//! in input order, so parallel runs stay byte-identical to serial ones.

use std::env;
use std::num::NonZeroUsize;
use std::thread;

/// Worker cap: `DEXFIT_THREADS` when set to a positive integer, otherwise
/// the machine's available parallelism, falling back to 1.
pub fn worker_cap() -> usize {
    if let Ok(raw) = env::var("DEXFIT_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1)
}

/// Applies `job` to every index in `0..count` on at most `cap` workers
/// and returns the results in index order.
pub fn map_indexed<T, F>(count: usize, cap: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = cap.max(1).min(count.max(1));
    if workers <= 1 || count <= 1 {
        return (0..count).map(job).collect();
    }
    // Contiguous chunks, one per worker; each returns its slice of the
    // output, concatenated back in worker order.
    let chunk = count.div_ceil(workers);
    let mut out = Vec::with_capacity(count);
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let job = &job;
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(count);
                scope.spawn(move || (lo..hi).map(job).collect::<Vec<T>>())
            })
            .collect();
        for handle in handles {
            out.extend(handle.join().expect("worker panicked"));
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_input_order() {
        for cap in [1, 2, 3, 16] {
            let got = map_indexed(10, cap, |i| i * i);
            assert_eq!(got, (0..10).map(|i| i * i).collect::<Vec<_>>());
        }
        assert_eq!(map_indexed(0, 4, |i| i), Vec::<usize>::new());
    }

    #[test]
    fn parallel_matches_serial_output() {
        let serial = map_indexed(97, 1, |i| (i as f64).sqrt());
        let parallel = map_indexed(97, 8, |i| (i as f64).sqrt());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn cap_never_drops_below_one() {
        assert!(worker_cap() >= 1);
    }
}
