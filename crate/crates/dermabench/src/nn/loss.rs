//! Softmax and categorical cross-entropy.

use ndarray::Array2;

use crate::scalar::Real;

/// Row-wise softmax with max subtraction for stability.
pub fn softmax<S: Real>(logits: &Array2<S>) -> Array2<S> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean categorical cross-entropy over one-hot targets, with the gradient
/// with respect to the logits ((softmax − target) / batch).
pub fn cross_entropy_with_softmax<S: Real>(
    logits: &Array2<S>,
    one_hot: &Array2<S>,
) -> (S, Array2<S>) {
    assert_eq!(logits.shape(), one_hot.shape());
    let b = logits.shape()[0];
    let bs = S::from_f64_c(b as f64);
    let probs = softmax(logits);
    let mut loss = S::zero();
    let tiny = S::from_f64_c(1e-12);
    ndarray::Zip::from(&probs).and(one_hot).for_each(|&p, &y| {
        if y > S::zero() {
            loss -= y * (p + tiny).ln();
        }
    });
    let grad = (&probs - one_hot) / bs;
    (loss / bs, grad)
}
