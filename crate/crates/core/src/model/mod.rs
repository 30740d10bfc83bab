//! The assembled network, its training objectives and inference loops.

mod count;
mod former;
mod objective;
mod rollout;

pub use count::count_parameters;
pub use former::{ablation_variant, Block, BlockStructures, ForwardOutput, HgtsFormer};
pub use objective::{forecast_loss, imputation_loss, mse_loss, training_targets};
pub use rollout::{rolling_forecast, ForecastOutput, NextPatch, PatchForecaster};
