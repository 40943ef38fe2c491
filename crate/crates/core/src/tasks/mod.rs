//! Datasets, splits, experiment configuration and training drivers.

mod compression;
mod config;
mod dataset;
mod model;
mod split;
mod train;

pub use compression::{compression_report, quantize_symmetric, quantized, CompressionRow};
pub use config::{EncoderConfig, ExperimentConfig, TaskConfig};
pub use dataset::{FieldDataset, Geometry, SampleSet};
pub use model::{Encoder, FieldModel, Prepared};
pub use split::{make_superres_split, make_temporal_split, split_regression, temporal_indices};
pub use train::{evaluate, evaluate_parallel, train, write_history_csv, HistoryRow, TrainOutcome};

/// Builds the (train, eval) pair that `config.task` prescribes for `ds`.
pub fn task_sets(config: &ExperimentConfig, ds: &FieldDataset) -> crate::Result<(SampleSet, SampleSet)> {
    match config.task {
        TaskConfig::Fit => {
            let all = ds.samples()?;
            Ok((all.clone(), all))
        }
        TaskConfig::Regression { ratio } => split_regression(ds, ratio, config.seed),
        TaskConfig::Superres { factor } => {
            let (coarse, full) = make_superres_split(ds, factor)?;
            Ok((coarse.samples()?, full.samples()?))
        }
        TaskConfig::Temporal => make_temporal_split(ds),
    }
}
