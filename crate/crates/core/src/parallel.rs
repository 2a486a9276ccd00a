//! Thread partitioning helpers. All parallel regions in the crate use scoped
//! threads over explicit, deterministic index ranges.

use std::ops::Range;
use std::thread;

/// Hardware concurrency, falling back to 1 when it cannot be queried.
pub fn available_threads() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Splits `0..n` into `parts` contiguous ranges; the first `n % parts` ranges
/// get one extra element.
pub fn balanced_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|t| {
            let len = base + usize::from(t < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Splits `0..n` into `parts` ranges of width `ceil(n / parts)`; trailing
/// ranges may be short or empty.
pub fn ceil_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let width = n.div_ceil(parts);
    (0..parts)
        .map(|t| {
            let start = (t * width).min(n);
            start..((t + 1) * width).min(n)
        })
        .collect()
}

/// Runs `work(t, range)` for every range, one scoped thread each, and returns
/// the results in range order. A single range runs on the calling thread.
pub fn map_ranges<R, F>(ranges: &[Range<usize>], work: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, Range<usize>) -> R + Sync,
{
    if ranges.len() <= 1 {
        return ranges
            .iter()
            .enumerate()
            .map(|(t, r)| work(t, r.clone()))
            .collect();
    }
    let work = &work;
    thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .enumerate()
            .map(|(t, r)| {
                let r = r.clone();
                s.spawn(move || work(t, r))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Like [`map_ranges`], but also hands each worker the disjoint slice of `out`
/// holding its rows, where every row is `row_len` values long.
pub fn map_row_blocks<R, F>(out: &mut [f64], row_len: usize, ranges: &[Range<usize>], work: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, Range<usize>, &mut [f64]) -> R + Sync,
{
    let mut blocks = Vec::with_capacity(ranges.len());
    let mut rest = out;
    for r in ranges {
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(r.len() * row_len);
        blocks.push(head);
        rest = tail;
    }
    if ranges.len() <= 1 {
        return blocks
            .into_iter()
            .zip(ranges)
            .enumerate()
            .map(|(t, (b, r))| work(t, r.clone(), b))
            .collect();
    }
    let work = &work;
    thread::scope(|s| {
        let handles: Vec<_> = blocks
            .into_iter()
            .zip(ranges)
            .enumerate()
            .map(|(t, (b, r))| {
                let r = r.clone();
                s.spawn(move || work(t, r, b))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Number of workers worth starting for `work` scalar operations when at most
/// `threads` are allowed and each must get at least `min_per_thread`.
pub(crate) fn workers_for(work: usize, threads: usize, min_per_thread: usize) -> usize {
    threads.max(1).min(work / min_per_thread.max(1)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split() {
        assert_eq!(balanced_ranges(10, 3), vec![0..4, 4..7, 7..10]);
        assert_eq!(balanced_ranges(2, 4), vec![0..1, 1..2, 2..2, 2..2]);
    }

    #[test]
    fn ceil_split() {
        assert_eq!(ceil_ranges(10, 3), vec![0..4, 4..8, 8..10]);
        assert_eq!(ceil_ranges(5, 4), vec![0..2, 2..4, 4..5, 5..5]);
        assert_eq!(ceil_ranges(3, 8).iter().map(|r| r.len()).sum::<usize>(), 3);
    }

    #[test]
    fn map_ranges_preserves_order() {
        let out = map_ranges(&balanced_ranges(100, 7), |t, r| (t, r.start));
        assert_eq!(out.len(), 7);
        assert!(out.windows(2).all(|w| w[0].1 < w[1].1));
    }
}
