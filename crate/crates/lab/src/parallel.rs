/// Order-preserving parallel map on scoped threads. Worker `w` takes items
/// `w, w + jobs, ...`, which balances inputs sorted by cost.
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let per_worker: Vec<Vec<R>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| scope.spawn(move || items.iter().skip(w).step_by(jobs).map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    let mut iters: Vec<_> = per_worker.into_iter().map(Vec::into_iter).collect();
    (0..items.len())
        .map(|i| iters[i % jobs].next().expect("worker produced every assigned item"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::par_map;

    #[test]
    fn matches_serial_for_any_job_count() {
        let items: Vec<u64> = (0..37).collect();
        let serial: Vec<u64> = items.iter().map(|x| x * x).collect();
        for jobs in [0, 1, 2, 5, 37, 100] {
            assert_eq!(par_map(&items, jobs, |x| x * x), serial);
        }
        assert!(par_map(&[] as &[u64], 4, |x| *x).is_empty());
    }
}
