use super::dataset::SampleSet;
use super::model::{Encoder, FieldModel};
use super::train::evaluate;
use crate::metrics::{bits_per_pixel, EvalReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionRow {
    pub bits_per_param: u32,
    pub bpp: f64,
    pub report: EvalReport,
}

/// Rounds every value of `params` onto a symmetric uniform grid with
/// `2^(bits−1) − 1` steps per side, scaled by the tensor's largest magnitude.
/// 32 bits leaves the tensor untouched.
pub fn quantize_symmetric(params: &mut [f32], bits: u32) -> Result<()> {
    if !(2..=32).contains(&bits) {
        return Err(Error::InvalidConfig(format!("cannot quantize to {bits} bits")));
    }
    if bits == 32 {
        return Ok(());
    }
    let max = params.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(());
    }
    let steps = ((1u64 << (bits - 1)) - 1) as f64;
    let scale = max as f64 / steps;
    for p in params.iter_mut() {
        let q = (*p as f64 / scale).round().clamp(-steps, steps);
        *p = (q * scale) as f32;
    }
    Ok(())
}

/// Copy of `model` with every parameter tensor quantized.
pub fn quantized(model: &FieldModel, bits: u32) -> Result<FieldModel> {
    let mut m = model.clone();
    if let Encoder::Grid(g) = &mut m.encoder {
        for level in g.levels_mut() {
            quantize_symmetric(level.params_mut(), bits)?;
        }
    }
    for t in m.mlp.param_slices_mut() {
        quantize_symmetric(t, bits)?;
    }
    Ok(m)
}

/// BPP and quality of `model` on `dataset` for each storage precision.
/// Pixels are counted over the spatial grid of `dataset`'s geometry.
pub fn compression_report(model: &FieldModel, dataset: &SampleSet, bits: &[u32]) -> Result<Vec<CompressionRow>> {
    let n_pixels = dataset.geometry.n_points();
    bits.iter()
        .map(|&b| {
            let q = quantized(model, b)?;
            Ok(CompressionRow {
                bits_per_param: b,
                bpp: bits_per_pixel(model.param_count(), b, n_pixels)?,
                report: evaluate(&q, dataset)?,
            })
        })
        .collect()
}
