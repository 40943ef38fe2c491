use ndarray::{Array2, ArrayView2, Zip};

use crate::{Error, Real, Result};

/// `Σ wᵢ‖predᵢ − targetᵢ‖² / Σ wᵢ` and its gradient with respect to `pred`.
///
/// Returns the loss in `f64` regardless of the working precision.
pub fn weighted_mse_and_grad<F: Real>(
    pred: ArrayView2<F>,
    target: ArrayView2<F>,
    weights: &[F],
) -> Result<(f64, Array2<F>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape {
            expected: pred.len(),
            actual: target.len(),
        });
    }
    if weights.len() != pred.nrows() {
        return Err(Error::Shape {
            expected: pred.nrows(),
            actual: weights.len(),
        });
    }
    let total: f64 = weights.iter().map(|w| w.f64()).sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < F::zero()) {
        return Err(Error::InvalidInput(
            "loss weights must be nonnegative with a positive sum".into(),
        ));
    }
    let mut grad = Array2::<F>::zeros(pred.dim());
    let mut loss = 0.0;
    let scale = F::of(2.0 / total);
    for (((p, t), mut g), &w) in pred
        .rows()
        .into_iter()
        .zip(target.rows())
        .zip(grad.rows_mut())
        .zip(weights)
    {
        Zip::from(&mut g).and(&p).and(&t).for_each(|g, &p, &t| {
            let e = p - t;
            loss += w.f64() * e.f64() * e.f64();
            *g = scale * w * e;
        });
    }
    Ok((loss / total, grad))
}
