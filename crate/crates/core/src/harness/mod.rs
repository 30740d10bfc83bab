//! Training, evaluation protocols and checkpoint persistence.

mod checkpoint;
mod eval;
mod train;

pub use checkpoint::{
    decode, encode, load_checkpoint, read_sidecar, save_checkpoint, sidecar_path, write_atomic, Sidecar, StoredTensor,
};
pub use eval::{
    evaluate_forecast, evaluate_imputation, EvalOptions, Forecaster, Imputer, MeanFill, MetricReport, MetricRow,
    RepeatLast, DEFAULT_HORIZONS, DEFAULT_RATIOS,
};
pub use train::{last_finite_path, train, validation_mse, EpochRecord, TrainRun};
