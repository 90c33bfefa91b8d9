//! Grid-scan helpers shared by the hypothesis checks and residual scans.
//!
//! With the `parallel` feature (the default) the per-index work fans out
//! over rayon; without it everything runs on the calling thread. Either way
//! the result is bit-identical: values are computed independently per index
//! and every floating-point reduction happens sequentially in index order,
//! so the output does not depend on thread count or work splitting.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f` at every index in `0..n`, collecting results in index order.
/// On error, the error at the smallest index wins.
pub fn try_map_values<E, F>(n: usize, f: F) -> Result<Vec<f64>, E>
where
    F: Fn(usize) -> Result<f64, E> + Sync + Send,
    E: Send,
{
    #[cfg(feature = "parallel")]
    let raw: Vec<Result<f64, E>> = (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let raw: Vec<Result<f64, E>> = (0..n).map(f).collect();

    let mut out = Vec::with_capacity(n);
    for item in raw {
        out.push(item?);
    }
    Ok(out)
}

/// Sequential reference version of [`try_map_values`]; used by the benches
/// to measure the parallel speedup on identical workloads.
pub fn try_map_values_seq<E, F>(n: usize, f: F) -> Result<Vec<f64>, E>
where
    F: Fn(usize) -> Result<f64, E>,
{
    (0..n).map(f).collect()
}

/// Infallible variant of [`try_map_values`].
pub fn map_values<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential reference version of [`map_values`].
pub fn map_values_seq<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64,
{
    (0..n).map(f).collect()
}

/// Maximum value and the index of its first occurrence. Empty input is a
/// caller bug.
pub fn max_with_argmax(values: &[f64]) -> (f64, usize) {
    assert!(!values.is_empty(), "max over empty scan");
    let mut best = values[0];
    let mut arg = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

/// Arithmetic mean accumulated in index order.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let f = |i: usize| (i as f64 * 0.1).sin() + 1.0 / (i as f64 + 1.0);
        let par = map_values(10_000, f);
        let seq = map_values_seq(10_000, f);
        assert_eq!(par.len(), seq.len());
        for (a, b) in par.iter().zip(seq.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn error_at_smallest_index_wins() {
        let f = |i: usize| if i % 3 == 2 { Err(i) } else { Ok(i as f64) };
        let err = try_map_values(100, f).unwrap_err();
        assert_eq!(err, 2);
        let err = try_map_values_seq(100, f).unwrap_err();
        assert_eq!(err, 2);
    }

    #[test]
    fn argmax_takes_first_of_ties() {
        let (v, i) = max_with_argmax(&[1.0, 3.0, 3.0, 2.0]);
        assert_eq!(v, 3.0);
        assert_eq!(i, 1);
    }
}
