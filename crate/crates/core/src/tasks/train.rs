use std::io::Write;

use ndarray::Array2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::dataset::SampleSet;
use super::model::{Encoder, FieldModel};
use crate::metrics::{weighted_metrics, EvalReport};
use crate::nn::{weighted_mse_and_grad, AdamW};
use crate::{Error, Result};

/// One evaluation record. `loss` is the weighted MSE over the whole
/// training set at that step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: u64,
    pub loss: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last step.
    pub last: FieldModel,
    /// Parameters at the evaluation with the highest wPSNR.
    pub best: FieldModel,
    pub best_step: u64,
    pub history: Vec<HistoryRow>,
    pub optimizer: AdamW,
}

impl TrainOutcome {
    pub fn best_row(&self) -> &HistoryRow {
        self.history
            .iter()
            .find(|r| r.step == self.best_step)
            .expect("best step is always recorded")
    }
}

/// Metrics of `model` on `set`. A constant target reports `wpsnr = NaN`.
pub fn evaluate(model: &FieldModel, set: &SampleSet) -> Result<EvalReport> {
    evaluate_parallel(model, set, 1)
}

pub fn evaluate_parallel(model: &FieldModel, set: &SampleSet, threads: usize) -> Result<EvalReport> {
    if model.output_dim() != set.channels {
        return Err(Error::Shape {
            expected: set.channels,
            actual: model.output_dim(),
        });
    }
    let pred = model.predict_parallel(&set.points, set.times.as_deref(), threads)?;
    match weighted_metrics(&pred, &set.targets, &set.weights) {
        Ok(r) => Ok(r),
        Err(Error::PsnrUndefined(r)) => Ok(*r),
        Err(e) => Err(e),
    }
}

fn full_loss(model: &FieldModel, set: &SampleSet) -> Result<f64> {
    let pred = model.predict(&set.points, set.times.as_deref())?;
    let c = set.channels;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, t), w) in pred.chunks_exact(c).zip(set.targets.chunks_exact(c)).zip(&set.weights) {
        num += w * p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        den += w;
    }
    Ok(num / den)
}

fn better(candidate: f64, best: f64) -> bool {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    key(candidate) > key(best)
}

/// Runs the optimization loop and records evaluation metrics at step 0,
/// every `eval_every` steps, and after the last step.
pub fn train(config: &ExperimentConfig, train_set: &SampleSet, eval_set: &SampleSet) -> Result<TrainOutcome> {
    config.check_dataset(&train_set.geometry, train_set.channels)?;
    config.check_dataset(&eval_set.geometry, eval_set.channels)?;
    let with_time = train_set.times.is_some();
    if eval_set.times.is_some() != with_time {
        return Err(Error::InvalidConfig(
            "train and eval sets disagree on the time input".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = FieldModel::new(&config.encoder, &config.model, with_time, &mut rng)?;
    let mut optimizer = AdamW::new(config.optimizer)?;

    let prepared = model.prepare(&train_set.points, train_set.times.as_deref())?;
    let n = train_set.len();
    let c = train_set.channels;
    let targets = Array2::from_shape_vec((n, c), train_set.targets.iter().map(|&v| v as f32).collect())
        .expect("sample set shape is validated");
    let weights: Vec<f32> = train_set.weights.iter().map(|&w| w as f32).collect();
    let batch = if config.batch_size == 0 || config.batch_size >= n {
        None
    } else {
        Some(config.batch_size)
    };
    let all_rows: Vec<usize> = (0..n).collect();
    let mut grid_grads = match &model.encoder {
        Encoder::Grid(g) => g.zero_grads(),
        Encoder::Baseline(_) => Vec::new(),
    };

    let mut history = Vec::new();
    let report = evaluate(&model, eval_set)?;
    history.push(HistoryRow {
        step: 0,
        loss: full_loss(&model, train_set)?,
        report,
    });
    let mut best = model.clone();
    let mut best_step = 0;
    let mut best_psnr = report.wpsnr;

    for step in 1..=config.steps {
        let sampled;
        let rows: &[usize] = match batch {
            None => &all_rows,
            Some(b) => {
                sampled = index::sample(&mut rng, n, b).into_vec();
                &sampled
            }
        };
        let x = model.gather(&prepared, rows)?;
        let (pred, cache) = model.mlp.forward(x.view())?;
        let (loss, grad) = if batch.is_none() {
            weighted_mse_and_grad(pred.view(), targets.view(), &weights)?
        } else {
            let t = targets.select(ndarray::Axis(0), rows);
            let w: Vec<f32> = rows.iter().map(|&r| weights[r]).collect();
            match weighted_mse_and_grad(pred.view(), t.view(), &w) {
                Err(Error::InvalidInput(_)) => continue, // batch drawn entirely from pole rows
                other => other?,
            }
        };
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss at step {step}")));
        }
        let (mlp_grads, dx) = model.mlp.backward(&cache, grad.view())?;
        let FieldModel { encoder, mlp, .. } = &mut model;
        match encoder {
            Encoder::Grid(g) => {
                for acc in &mut grid_grads {
                    acc.fill(0.0);
                }
                if let super::model::Prepared::Plan(plan) = &prepared {
                    g.scatter_grads(plan, rows, dx.view(), &mut grid_grads)?;
                }
                let mut params: Vec<&mut [f32]> = g.levels_mut().iter_mut().map(|l| l.params_mut()).collect();
                params.extend(mlp.param_slices_mut());
                let mut grads: Vec<&[f32]> = grid_grads.iter().map(|v| v.as_slice()).collect();
                grads.extend(mlp_grads.slices());
                optimizer.step(&mut params, &grads)?;
            }
            Encoder::Baseline(_) => {
                optimizer.step(&mut mlp.param_slices_mut(), &mlp_grads.slices())?;
            }
        }
        if step % config.eval_every == 0 || step == config.steps {
            let report = evaluate(&model, eval_set)?;
            let loss = full_loss(&model, train_set)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss at step {step}")));
            }
            log::debug!("step {step}: loss {loss:.3e}, wpsnr {:.3}", report.wpsnr);
            history.push(HistoryRow { step, loss, report });
            if better(report.wpsnr, best_psnr) {
                best_psnr = report.wpsnr;
                best_step = step;
                best = model.clone();
            }
        }
    }
    Ok(TrainOutcome {
        last: model,
        best,
        best_step,
        history,
        optimizer,
    })
}

/// Writes `step,loss,wrmse,wmae,wpsnr` rows.
pub fn write_history_csv<W: Write>(rows: &[HistoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("writing history: {e}"));
    w.write_record(["step", "loss", "wrmse", "wmae", "wpsnr"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.loss.to_string(),
            r.report.wrmse.to_string(),
            r.report.wmae.to_string(),
            r.report.wpsnr.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("writing history: {e}")))?;
    Ok(())
}
