//! Replicate-level parallelism with a deterministic result order.

use rayon::prelude::*;

use crate::rng::replicate_seed;

/// Run `f(r, seed_r)` for every replicate `r < count` and return the
/// results in replicate order.
///
/// `jobs = 0` uses rayon's default pool size. The output is identical for
/// every value of `jobs` because each replicate owns its seed and results
/// are collected by index.
pub fn map_replicates<T, F>(count: u64, root_seed: u64, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    if jobs == 1 {
        return (0..count).map(|r| f(r, replicate_seed(root_seed, r))).collect();
    }
    let run = || (0..count).into_par_iter().map(|r| f(r, replicate_seed(root_seed, r))).collect::<Vec<T>>();
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

/// Fallible variant: the first error in replicate order wins.
pub fn try_map_replicates<T, E, F>(count: u64, root_seed: u64, jobs: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64, u64) -> Result<T, E> + Sync + Send,
{
    map_replicates(count, root_seed, jobs, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_values_do_not_depend_on_jobs() {
        let serial = map_replicates(200, 5, 1, |r, s| (r, s));
        let parallel = map_replicates(200, 5, 4, |r, s| (r, s));
        let default = map_replicates(200, 5, 0, |r, s| (r, s));
        assert_eq!(serial, parallel);
        assert_eq!(serial, default);
        assert!(serial.iter().enumerate().all(|(i, (r, _))| *r == i as u64));
    }

    #[test]
    fn first_error_in_order_is_reported() {
        let out: Result<Vec<u64>, u64> = try_map_replicates(50, 1, 3, |r, _| if r % 7 == 3 { Err(r) } else { Ok(r) });
        assert_eq!(out, Err(3));
    }
}
