use hgts::config::{DataConfig, LossTokens, LrSchedule, SplitPreset};
use hgts::data::{synthetic_ett, Dataset, SeriesTable};
use hgts::harness::{
    encode, evaluate_forecast, evaluate_imputation, last_finite_path, load_checkpoint, read_sidecar, save_checkpoint,
    sidecar_path, train, EvalOptions, MeanFill, RepeatLast, DEFAULT_HORIZONS,
};
use hgts::model::HgtsFormer;
use hgts::{HgtsError, ModelConfig, RunConfig, Task, TrainConfig};
use hgts_tensor::{Graph, Tensor};

fn run(task: Task) -> RunConfig {
    let mut model = ModelConfig::tiny(3);
    model.task = task;
    model.causal = task == Task::Forecast;
    let mut run = RunConfig {
        name: "toy".into(),
        model,
        train: TrainConfig::default(),
        data: DataConfig::default(),
    };
    run.train.batch_size = 8;
    run.train.epochs = 2;
    run.train.train_stride = 8;
    run.train.lr = 1e-3;
    run
}

fn dataset(len: usize) -> Dataset {
    Dataset::new(&synthetic_ett(len, 3, 9), &SplitPreset::Ratio { train: 0.6, val: 0.2 }).unwrap()
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.hgtf");
    let cfg = run(Task::Forecast);
    let model = HgtsFormer::<f32>::new(cfg.model.clone(), 11).unwrap();
    save_checkpoint(&path, &model, &cfg).unwrap();
    let (back, back_cfg) = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(back_cfg, cfg);
    let x = dataset(300).gather::<f32>(&[0, 17], 32).unwrap();
    let (g1, g2) = (Graph::inference(), Graph::inference());
    let a = g1.value(model.forward(&g1, &x, None).unwrap().head);
    let b = g2.value(back.forward(&g2, &x, None).unwrap().head);
    let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(read_sidecar(&path).unwrap().param_count, model.num_parameters());
}

#[test]
fn damaged_checkpoints_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.hgtf");
    let cfg = run(Task::Forecast);
    let model = HgtsFormer::<f64>::new(cfg.model.clone(), 3).unwrap();
    save_checkpoint(&path, &model, &cfg).unwrap();
    let good = std::fs::read(&path).unwrap();

    std::fs::write(&path, &good[..good.len() / 2]).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(HgtsError::Format(_))));

    let mut bad = good.clone();
    bad[good.len() / 3] ^= 1;
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(HgtsError::Format(_))));

    let mut bad = good.clone();
    bad[4] = 2;
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(HgtsError::Format(_))));

    // a valid container whose tensors disagree with the sidecar config
    let t = Tensor::<f64>::zeros([3, 3]);
    std::fs::write(&path, encode(&[("embed.weight", &t)]).unwrap()).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(HgtsError::Integrity(_))));

    let mut wide = cfg.clone();
    wide.model.d_model = 32;
    std::fs::write(&path, &good).unwrap();
    std::fs::write(
        sidecar_path(&path),
        format!("{}\n[checkpoint]\nparam_count = {}\n", wide.to_text(), model.num_parameters()),
    )
    .unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(HgtsError::Integrity(_))));
}

#[test]
fn training_is_deterministic_and_keeps_the_best_epoch() {
    let ds = dataset(400);
    let mut cfg = run(Task::Forecast);
    cfg.train.epochs = 3;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.hgtf");
    let (model, a) = train::<f32>(&cfg, &ds, Some(&path)).unwrap();
    let (_, b) = train::<f32>(&cfg, &ds, None).unwrap();
    assert_eq!(a.step_losses, b.step_losses);
    assert_eq!(a.to_csv().lines().count(), 4);
    let min = a.epochs.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_val_mse(), min);
    let (saved, _) = load_checkpoint::<f32>(&path).unwrap();
    for ((_, p), (_, q)) in saved.params().iter().zip(model.params().iter()) {
        assert_eq!(p.value(), q.value());
    }
}

#[test]
fn tiny_overfit_reaches_small_loss() {
    let len = 200;
    let table = SeriesTable {
        timestamps: (0..len as i64).map(|t| t * 3600).collect(),
        names: vec!["a".into(), "b".into()],
        values: vec![
            (0..len).map(|t| (t as f64 * 0.3).sin()).collect(),
            (0..len).map(|t| (t as f64 * 0.11).cos() * 2.0).collect(),
        ],
    };
    let ds = Dataset::new(&table, &SplitPreset::Ratio { train: 0.6, val: 0.2 }).unwrap();
    let mut cfg = run(Task::Forecast);
    cfg.model.channels = 2;
    cfg.train.train_stride = 26;
    cfg.train.batch_size = 4;
    cfg.train.epochs = 500;
    cfg.train.lr = 3e-3;
    cfg.train.lr_schedule = LrSchedule::Constant;
    cfg.train.loss_tokens = LossTokens::All;
    cfg.train.val_windows = 1;
    let (_, out) = train::<f32>(&cfg, &ds, None).unwrap();
    assert_eq!(out.epochs[0].steps, 1, "four windows, one batch");
    let best = out.step_losses.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(best < 1e-3, "lowest loss {best}");
}

#[test]
fn divergence_aborts_and_saves_last_finite_state() {
    let ds = dataset(400);
    let mut cfg = run(Task::Forecast);
    cfg.train.lr = 1e30;
    cfg.train.grad_clip = 1e30;
    cfg.train.lr_schedule = LrSchedule::Constant;
    cfg.train.epochs = 5;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hgtf");
    let err = train::<f32>(&cfg, &ds, Some(&path)).unwrap_err();
    assert!(err.is_numeric(), "{err}");
    let (saved, _) = load_checkpoint::<f32>(&last_finite_path(&path)).unwrap();
    assert!(saved.params().iter().all(|(_, p)| p.value().all_finite()));
}

#[test]
fn imputation_training_and_report() {
    let ds = dataset(500);
    let cfg = run(Task::Impute);
    let (model, out) = train::<f32>(&cfg, &ds, None).unwrap();
    assert_eq!(out.epochs.len(), 2);
    let opts = EvalOptions {
        stride: 16,
        ..EvalOptions::test(&ds)
    };
    let r = evaluate_imputation(&model, &ds, &hgts::harness::DEFAULT_RATIOS, &opts).unwrap();
    assert_eq!(r.rows.len(), 4);
    let avg = r.rows.iter().map(|x| x.mse).sum::<f64>() / 4.0;
    assert!((r.avg_mse() - avg).abs() < 1e-9);
    let fill = MeanFill::from_dataset(&ds, cfg.model.lookback);
    let base = evaluate_imputation::<f32, _>(&fill, &ds, &[0.25], &opts).unwrap();
    assert!(base.rows[0].mse.is_finite());
}

#[test]
fn forecast_report_has_default_layout() {
    let ds = dataset(6000);
    let r = evaluate_forecast::<f32, _>(
        &RepeatLast { lookback: 32 },
        &ds,
        &DEFAULT_HORIZONS,
        &EvalOptions {
            stride: 50,
            ..EvalOptions::test(&ds)
        },
    )
    .unwrap();
    let csv = r.to_csv();
    let keys: Vec<_> = csv.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(keys, ["horizon", "96", "192", "336", "720", "avg"]);
}
