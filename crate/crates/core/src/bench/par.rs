//! Order-preserving map over independent jobs.

use crate::error::Result;

/// Applies `f` to every item, in parallel unless `jobs == Some(1)` or the
/// `parallel` feature is off. The output order matches the input order.
pub fn map<T, R, F>(items: &[T], jobs: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs != Some(1) {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.unwrap_or(0))
            .build()
            .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
        return Ok(pool.install(|| items.par_iter().map(&f).collect()));
    }
    let _ = jobs;
    Ok(map_sequential(items, f))
}

/// Sequential reference implementation of [`map`].
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let xs: Vec<u64> = (0..100).collect();
        let par = map(&xs, None, |x| x * x).unwrap();
        let seq = map(&xs, Some(1), |x| x * x).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par[99], 99 * 99);
        assert_eq!(
            map(&xs, Some(3), |x| x + 1).unwrap(),
            map_sequential(&xs, |x| x + 1)
        );
    }
}
