//! Latitude-weighted error metrics and bits-per-pixel accounting.

use std::fmt;

use crate::{Error, Result, SphericalPoint};

/// Quality of a prediction against a target field.
///
/// `wpsnr` is `+∞` when `wrmse` is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub wrmse: f64,
    pub wmae: f64,
    pub wpsnr: f64,
    pub n_points: usize,
    pub data_range: f64,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wrmse={}", self.wrmse)?;
        writeln!(f, "wmae={}", self.wmae)?;
        writeln!(f, "wpsnr={}", self.wpsnr)?;
        writeln!(f, "n_points={}", self.n_points)?;
        write!(f, "data_range={}", self.data_range)
    }
}

/// `cos ψᵢ` normalized to mean one. Exact poles get weight zero.
pub fn latitude_weights(points: &[SphericalPoint]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points to weight".into()));
    }
    let cos: Vec<f64> = points
        .iter()
        .map(|p| {
            if p.lat().abs() == std::f64::consts::FRAC_PI_2 {
                0.0
            } else {
                p.lat().cos().max(0.0)
            }
        })
        .collect();
    let mean = cos.iter().sum::<f64>() / cos.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidInput("all points lie on the poles".into()));
    }
    Ok(cos.into_iter().map(|c| c / mean).collect())
}

/// Weighted RMSE, MAE and PSNR over flattened `(point, channel)` values.
///
/// `pred` and `target` hold `weights.len()` rows of equal width, row-major.
/// The PSNR peak is the target's data range; a constant target yields
/// [`Error::PsnrUndefined`] carrying the remaining metrics.
pub fn weighted_metrics(pred: &[f64], target: &[f64], weights: &[f64]) -> Result<EvalReport> {
    if pred.len() != target.len() {
        return Err(Error::Shape {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if weights.is_empty() || !target.len().is_multiple_of(weights.len()) || target.is_empty() {
        return Err(Error::Shape {
            expected: weights.len(),
            actual: target.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be nonnegative".into()));
    }
    let channels = target.len() / weights.len();
    let mut sw = 0.0;
    let mut se2 = 0.0;
    let mut sae = 0.0;
    for ((p, t), &w) in pred
        .chunks_exact(channels)
        .zip(target.chunks_exact(channels))
        .zip(weights)
    {
        for (a, b) in p.iter().zip(t) {
            let e = a - b;
            se2 += w * e * e;
            sae += w * e.abs();
        }
        sw += w * channels as f64;
    }
    if !(sw > 0.0) {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    let (lo, hi) = target.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let wrmse = (se2 / sw).sqrt();
    let wmae = sae / sw;
    let data_range = hi - lo;
    let mut report = EvalReport {
        wrmse,
        wmae,
        wpsnr: f64::NAN,
        n_points: weights.len(),
        data_range,
    };
    if !(data_range > 0.0) {
        return Err(Error::PsnrUndefined(Box::new(report)));
    }
    report.wpsnr = psnr(data_range, wrmse);
    Ok(report)
}

/// `20·log10(range / rmse)`, `+∞` for a perfect fit.
pub fn psnr(data_range: f64, rmse: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (data_range / rmse).log10()
    }
}

/// Model size in bits divided by the number of represented pixels.
pub fn bits_per_pixel(total_param_count: usize, bits_per_param: u32, n_pixels: usize) -> Result<f64> {
    if n_pixels == 0 {
        return Err(Error::InvalidInput("pixel count must be positive".into()));
    }
    Ok(total_param_count as f64 * bits_per_param as f64 / n_pixels as f64)
}
