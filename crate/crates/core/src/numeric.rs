//! Deterministic reductions.

/// Below this length sums are accumulated left to right.
pub const PAIRWISE_THRESHOLD: usize = 4096;

/// Sums `values` with a fixed-tree pairwise reduction once the slice exceeds
/// [`PAIRWISE_THRESHOLD`]. The split points depend only on the length, so the
/// result is reproducible for a given input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_THRESHOLD {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean of `f` over `values`, reduced with [`pairwise_sum`].
pub fn mean_by<T>(values: &[T], f: impl Fn(&T) -> f64) -> f64 {
    let mapped: Vec<f64> = values.iter().map(f).collect();
    pairwise_sum(&mapped) / mapped.len() as f64
}
