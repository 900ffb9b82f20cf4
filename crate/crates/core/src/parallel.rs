//! Data-parallel helpers over index ranges.
//!
//! Grid certification and region iteration are embarrassingly parallel; we
//! split the index range into contiguous chunks, run each chunk on its own
//! scoped thread, and merge chunk results in chunk order so the outcome is
//! independent of scheduling. `TORUSENDO_THREADS` caps the thread count.

pub fn thread_count() -> usize {
    if let Ok(v) = std::env::var("TORUSENDO_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
}

/// Maps `f` over `0..len` in parallel and folds the per-chunk outputs with
/// `merge`, always in chunk order.
pub fn map_reduce<T, F, M>(len: usize, init: T, f: F, merge: M) -> T
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
    M: Fn(T, T) -> T,
{
    let threads = thread_count().min(len.max(1));
    if threads <= 1 || len < 2 {
        return merge(init, f(0..len));
    }
    let chunk = len.div_ceil(threads);
    let mut out = init;
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let lo = t * chunk;
                let hi = ((t + 1) * chunk).min(len);
                let f = &f;
                scope.spawn(move || f(lo..hi))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect::<Vec<_>>()
    });
    for r in results {
        out = merge(out, r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_match_serial() {
        let total = map_reduce(
            10_000,
            0u64,
            |range| range.map(|i| i as u64).sum::<u64>(),
            |a, b| a + b,
        );
        assert_eq!(total, 10_000 * 9_999 / 2);
    }

    #[test]
    fn order_independent_min() {
        let vals: Vec<f64> = (0..5000).map(|i| ((i * 2654435761u64 as usize) % 9973) as f64).collect();
        let expect = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let got = map_reduce(
            vals.len(),
            f64::INFINITY,
            |range| range.map(|i| vals[i]).fold(f64::INFINITY, f64::min),
            f64::min,
        );
        assert_eq!(got, expect);
    }
}
