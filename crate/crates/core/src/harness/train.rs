use std::path::{Path, PathBuf};
use std::time::Instant;

use hgts_tensor::optim::cosine_lr;
use hgts_tensor::{Adam, AdamConfig, Element, Graph, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::save_checkpoint;
use super::eval::{evaluate_imputation, EvalOptions, Forecaster, DEFAULT_RATIOS};
use crate::config::{LrSchedule, RunConfig, Task};
use crate::data::{batches, make_imputation_mask, sliding_starts, Dataset};
use crate::error::{HgtsError, Result};
use crate::model::{forecast_loss, imputation_loss, HgtsFormer, PatchForecaster};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_mse: f64,
    pub steps: usize,
    pub secs: f64,
}

/// Outcome of [`train`].
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub config: RunConfig,
    pub epochs: Vec<EpochRecord>,
    /// Per-step training losses, in order.
    pub step_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_checkpoint: Option<PathBuf>,
    pub secs_per_iter: f64,
    pub seed: u64,
}

impl TrainRun {
    pub fn best_val_mse(&self) -> f64 {
        self.epochs[self.best_epoch].val_mse
    }

    /// `epoch,lr,train_loss,val_mse,steps`; reproducible for a fixed seed.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,val_mse,steps\n");
        for e in &self.epochs {
            s += &format!("{},{:e},{:.9},{:.9},{}\n", e.epoch, e.lr, e.train_loss, e.val_mse, e.steps);
        }
        s
    }

    /// `epoch,secs` plus the mean seconds per optimizer step.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("epoch,secs\n");
        for e in &self.epochs {
            s += &format!("{},{:.3}\n", e.epoch, e.secs);
        }
        s += &format!("secs_per_iter,{:.6}\n", self.secs_per_iter);
        s
    }
}

/// Where the last finite parameters go when training diverges.
pub fn last_finite_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".last-finite");
    PathBuf::from(s)
}

fn training_starts(run: &RunConfig, ds: &Dataset) -> Vec<usize> {
    let m = &run.model;
    let w = match m.task {
        Task::Forecast => m.lookback + m.patch_len,
        Task::Impute => m.lookback,
    };
    sliding_starts(ds.split.train.clone(), w, run.train.train_stride)
}

/// Validation MSE in standardized units: next-patch error for forecasting,
/// hidden-point error at a 25% mask for imputation.
pub fn validation_mse<T: Element>(model: &HgtsFormer<T>, run: &RunConfig, ds: &Dataset) -> Result<f64> {
    let m = &run.model;
    let mut opts = EvalOptions {
        range: ds.split.val.clone(),
        batch_size: run.train.batch_size,
        max_windows: run.train.val_windows,
        seed: run.train.seed ^ 0x5eed,
        mask_shared: run.data.mask_shared,
        stride: m.patch_len,
    };
    match m.task {
        Task::Forecast => {
            let report = super::eval::evaluate_forecast(&NextPatchOnly(model), ds, &[m.patch_len], &opts)?;
            report
                .rows
                .first()
                .map(|r| r.mse)
                .ok_or_else(|| HgtsError::Data("validation range holds no forecast window".into()))
        }
        Task::Impute => {
            opts.stride = (m.lookback / 4).max(1);
            Ok(evaluate_imputation(model, ds, &[DEFAULT_RATIOS[1]], &opts)?.rows[0].mse)
        }
    }
}

struct NextPatchOnly<'a, T: Element>(&'a HgtsFormer<T>);

impl<T: Element> Forecaster<T> for NextPatchOnly<'_, T> {
    fn lookback(&self) -> usize {
        self.0.config().lookback
    }

    fn forecast(&self, context: &Tensor<T>, _horizon: usize) -> Result<Tensor<T>> {
        Ok(self.0.next_patch(context)?.values)
    }
}

/// Trains a fresh model from `run.train.seed`. With a checkpoint path,
/// the best epoch by validation MSE is saved there. The returned model
/// holds the best parameters.
pub fn train<T: Element>(run: &RunConfig, ds: &Dataset, checkpoint: Option<&Path>) -> Result<(HgtsFormer<T>, TrainRun)> {
    run.model.validate()?;
    run.train.validate()?;
    if ds.channels() != run.model.channels {
        return Err(HgtsError::Config(format!(
            "config expects {} channels, data has {}",
            run.model.channels,
            ds.channels()
        )));
    }
    let tc = &run.train;
    let starts = training_starts(run, ds);
    if starts.is_empty() {
        return Err(HgtsError::Data(format!(
            "training range of {} points holds no window",
            ds.split.train.len()
        )));
    }
    let mut model = HgtsFormer::<T>::new(run.model.clone(), tc.seed)?;
    let mut opt = Adam::new(AdamConfig::with_lr(tc.lr), model.params());
    let mut mask_rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x6d61736b);
    let mut best: Option<(usize, f64, ParamStore<T>)> = None;
    let mut epochs = Vec::with_capacity(tc.epochs);
    let mut step_losses = Vec::new();
    let (mut total_steps, mut step_secs) = (0usize, 0.0f64);

    for epoch in 0..tc.epochs {
        let lr = match tc.lr_schedule {
            LrSchedule::Cosine => cosine_lr(tc.lr, epoch, tc.epochs),
            LrSchedule::Constant => tc.lr,
        };
        opt.set_lr(lr);
        let t0 = Instant::now();
        let mut plan = batches(&starts, tc.batch_size, Some(tc.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9)));
        if tc.max_batches > 0 {
            plan.truncate(tc.max_batches);
        }
        let mut loss_sum = 0.0;
        for chunk in &plan {
            let ts = Instant::now();
            let g = Graph::new();
            let step = |model: &HgtsFormer<T>, mask_rng: &mut ChaCha8Rng| -> Result<(f64, Option<hgts_tensor::Gradients<T>>)> {
                let loss = match run.model.task {
                    Task::Forecast => {
                        let window = ds.gather::<T>(chunk, run.model.lookback + run.model.patch_len)?;
                        forecast_loss(model, &g, &window, tc.loss_tokens)?
                    }
                    Task::Impute => {
                        let truth = ds.gather::<T>(chunk, run.model.lookback)?;
                        let ratio = DEFAULT_RATIOS[mask_rng.random_range(0..DEFAULT_RATIOS.len())];
                        let (observed, _) = make_imputation_mask::<T>(
                            [chunk.len(), ds.channels(), run.model.lookback],
                            ratio,
                            mask_rng.random(),
                            run.data.mask_shared,
                        )?;
                        // hidden points are zeroed inside the model's normalization
                        imputation_loss(model, &g, &truth, &observed)?
                    }
                };
                let value = g.value(loss).item()?.as_f64();
                let grads = if value.is_finite() { Some(g.backward(loss)?) } else { None };
                Ok((value, grads))
            };
            let (value, grads) = match step(&model, &mut mask_rng) {
                Ok(r) => r,
                Err(e) if e.is_numeric() => return Err(diverged(&model, run, checkpoint, epoch, total_steps, f64::NAN)),
                Err(e) => return Err(e),
            };
            let params = model.params_mut();
            params.zero_grad();
            if let Some(grads) = &grads {
                grads.accumulate_into(params)?;
            }
            let norm = params.grad_norm().as_f64();
            if !value.is_finite() || !norm.is_finite() {
                return Err(diverged(&model, run, checkpoint, epoch, total_steps, value));
            }
            params.clip_grad_norm(T::of(tc.grad_clip));
            opt.step(params)?;
            loss_sum += value;
            step_losses.push(value);
            total_steps += 1;
            step_secs += ts.elapsed().as_secs_f64();
        }
        let val_mse = match validation_mse(&model, run, ds) {
            Err(e) if e.is_numeric() => f64::NAN,
            r => r?,
        };
        if !val_mse.is_finite() {
            return Err(diverged(&model, run, checkpoint, epoch, total_steps, val_mse));
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / plan.len() as f64,
            val_mse,
            steps: plan.len(),
            secs: t0.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: lr {lr:.3e} train {:.6} val {:.6} ({:.1}s)",
            record.train_loss,
            val_mse,
            record.secs
        );
        epochs.push(record);
        if best.as_ref().is_none_or(|(_, v, _)| val_mse < *v) {
            if let Some(path) = checkpoint {
                save_checkpoint(path, &model, run)?;
            }
            best = Some((epoch, val_mse, model.params().clone()));
        }
    }
    let (best_epoch, _, best_params) = best.expect("at least one epoch");
    model.load_params(&best_params)?;
    Ok((
        model,
        TrainRun {
            config: run.clone(),
            epochs,
            step_losses,
            best_epoch,
            best_checkpoint: checkpoint.map(Path::to_path_buf),
            secs_per_iter: step_secs / total_steps.max(1) as f64,
            seed: tc.seed,
        },
    ))
}

fn diverged<T: Element>(
    model: &HgtsFormer<T>,
    run: &RunConfig,
    checkpoint: Option<&Path>,
    epoch: usize,
    step: usize,
    value: f64,
) -> HgtsError {
    let finite = model.params().iter().all(|(_, p)| p.value().all_finite());
    let saved = match checkpoint {
        Some(_) if !finite => "; parameters are no longer finite, nothing saved".to_string(),
        Some(path) => {
            let p = last_finite_path(path);
            match save_checkpoint(&p, model, run) {
                Ok(()) => format!("; last finite parameters saved to {}", p.display()),
                Err(e) => format!("; saving last finite parameters failed: {e}"),
            }
        }
        None => String::new(),
    };
    HgtsError::Numeric(format!("training diverged at epoch {epoch}, step {step} (loss {value}){saved}"))
}
