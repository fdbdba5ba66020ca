//! Loss and score primitives.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean squared error between predictions and targets.
pub fn mse<T: Scalar>(predictions: &[T], targets: &[T]) -> Result<T> {
    if predictions.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("mse of an empty vector"));
    }
    let sum = predictions
        .iter()
        .zip(targets)
        .fold(T::zero(), |acc, (&p, &y)| acc + (y - p) * (y - p));
    Ok(sum / T::from_usize_lossy(targets.len()))
}

/// `lambda * splits^2 + empirical_risk`.
pub fn penalized_score<T: Scalar>(empirical_risk: T, splits: usize, lambda: T) -> T {
    let p = T::from_usize_lossy(splits);
    lambda * p * p + empirical_risk
}

/// Largest split count a cell may use: `floor(M / sqrt(lambda))`.
///
/// A tree with more splits than this can never beat the zero function
/// under the penalized objective, whose risk is at most `M^2`.
pub fn max_splits(target_bound: f64, lambda: f64) -> usize {
    debug_assert!(target_bound > 0.0 && lambda > 0.0);
    let bound = target_bound / lambda.sqrt();
    if bound >= usize::MAX as f64 {
        usize::MAX
    } else {
        bound.floor() as usize
    }
}
