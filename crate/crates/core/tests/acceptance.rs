//! Acceptance gates. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any fails. Gates that need the ETTh1 table read it from
//! `HGTS_ETTH1` or `data/ETTh1.csv` at the workspace root.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hgts::config::{DataConfig, LossTokens, LrSchedule, SplitPreset, TopkAxis};
use hgts::data::{load_csv, synthetic_ett, Dataset};
use hgts::harness::{
    decode, evaluate_forecast, evaluate_imputation, load_checkpoint, save_checkpoint, train, EvalOptions, MeanFill,
    RepeatLast,
};
use hgts::model::{count_parameters, HgtsFormer};
use hgts::verify::checks::{self, Measure};
use hgts::{Ablation, HgtsError, ModelConfig, RunConfig, Task, TrainConfig};
use hgts_tensor::{Graph, Tensor};

type Outcome = Result<String, String>;

const SEED: u64 = 20240601;

fn measure(name: &str, m: &Measure) -> Result<String, String> {
    let line = format!("{name} worst {:.3e} (tol {:.0e}, {} draws)", m.worst, m.tol, m.draws);
    if m.passed() {
        Ok(line)
    } else {
        Err(line)
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let failed = parts.iter().any(Result::is_err);
    let text = parts.into_iter().map(|p| p.unwrap_or_else(|e| format!("FAILED {e}"))).collect::<Vec<_>>().join("; ");
    if failed {
        Err(text)
    } else {
        Ok(text)
    }
}

fn err(e: HgtsError) -> String {
    e.to_string()
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn etth1_path() -> Result<PathBuf, String> {
    let p = std::env::var_os("HGTS_ETTH1").map(PathBuf::from).unwrap_or_else(|| workspace().join("data/ETTh1.csv"));
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("ETTh1 table not found at {} (set HGTS_ETTH1)", p.display()))
    }
}

fn etth1() -> Result<Dataset, String> {
    let table = load_csv(&etth1_path()?).map_err(err)?;
    Dataset::new(&table, &SplitPreset::EttCalendar { steps_per_hour: 1 }).map_err(err)
}

fn gradient_correctness() -> Outcome {
    measure("max relative error", &checks::gradients(2, SEED).map_err(err)?)
}

fn hypergraph_oracle() -> Outcome {
    measure("max |HGA - loop oracle|", &checks::hga_oracle(50, -1e9, SEED).map_err(err)?)
}

fn structural_invariants() -> Outcome {
    let n = 100;
    let (iso, rel) = checks::rope(n, SEED).map_err(err)?;
    all(vec![
        measure("topk cardinality violations", &checks::topk_cardinality(n, SEED).map_err(err)?),
        measure("rope isometry", &iso),
        measure("rope relative position", &rel),
        measure("revin round trip", &checks::revin_round_trip(n, SEED).map_err(err)?),
        measure("causal prefix", &checks::causal_prefix(n, SEED).map_err(err)?),
        measure("seed determinism violations", &checks::seed_determinism(n, SEED).map_err(err)?),
    ])
}

fn table_iv_config() -> ModelConfig {
    ModelConfig {
        layers: 1,
        d_model: 512,
        d_ff: 2048,
        heads: 8,
        patch_len: 96,
        lookback: 672,
        edge_num: 4,
        channels: 7,
        ..ModelConfig::tiny(7)
    }
}

fn parameter_count() -> Outcome {
    let cfg = table_iv_config();
    let closed = count_parameters(&cfg);
    let built = HgtsFormer::<f32>::new(cfg, 0).map_err(err)?.num_parameters();
    let rel = closed as f64 / 10.38e6 - 1.0;
    let text = format!("closed form {closed}, enumerated {built}, {:+.2}% vs 10.38M", rel * 100.0);
    if closed == built && rel.abs() <= 0.05 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn run_config(model: ModelConfig, train: TrainConfig) -> RunConfig {
    RunConfig {
        name: "acceptance".into(),
        model,
        train,
        data: DataConfig {
            split: SplitPreset::EttCalendar { steps_per_hour: 1 },
            mask_shared: false,
        },
    }
}

fn desk_forecast_run() -> RunConfig {
    let model = ModelConfig {
        layers: 1,
        d_model: 256,
        d_ff: 512,
        heads: 8,
        patch_len: 48,
        lookback: 672,
        edge_num: 7,
        channels: 7,
        init_std: 0.02,
        topk_axis: TopkAxis::PerNode,
        ..ModelConfig::tiny(7)
    };
    run_config(
        model,
        TrainConfig {
            lr: 1e-4,
            lr_schedule: LrSchedule::Cosine,
            batch_size: 32,
            epochs: 3,
            seed: 1,
            loss_tokens: LossTokens::All,
            ..TrainConfig::default()
        },
    )
}

fn desk_forecasting() -> Outcome {
    let ds = etth1()?;
    let run = desk_forecast_run();
    let (model, _) = train::<f32>(&run, &ds, None).map_err(err)?;
    let opts = EvalOptions::test(&ds);
    let ours = evaluate_forecast(&model, &ds, &[96], &opts).map_err(err)?.rows[0].clone();
    let base = evaluate_forecast::<f32, _>(&RepeatLast { lookback: 672 }, &ds, &[96], &opts).map_err(err)?.rows[0].clone();
    let text = format!(
        "test h96 MSE {:.4} MAE {:.4}; repeat-last MSE {:.4} MAE {:.4}",
        ours.mse, ours.mae, base.mse, base.mae
    );
    if ours.mse <= 0.55 && ours.mse < base.mse && ours.mae < base.mae {
        Ok(text)
    } else {
        Err(text)
    }
}

fn desk_imputation() -> Outcome {
    let ds = etth1()?;
    let model = ModelConfig {
        layers: 2,
        d_model: 128,
        d_ff: 1024,
        heads: 8,
        patch_len: 16,
        lookback: 1024,
        edge_num: 24,
        channels: 7,
        causal: false,
        task: Task::Impute,
        ..ModelConfig::tiny(7)
    };
    let run = run_config(
        model,
        TrainConfig {
            lr: 2e-3,
            batch_size: 32,
            epochs: 5,
            seed: 1,
            ..TrainConfig::default()
        },
    );
    let (model, _) = train::<f32>(&run, &ds, None).map_err(err)?;
    let opts = EvalOptions {
        stride: 64,
        ..EvalOptions::test(&ds)
    };
    let ours = evaluate_imputation(&model, &ds, &[0.25], &opts).map_err(err)?.rows[0].mse;
    let fill = MeanFill::from_dataset(&ds, 1024);
    let base = evaluate_imputation::<f32, _>(&fill, &ds, &[0.25], &opts).map_err(err)?.rows[0].mse;
    let gain = 1.0 - ours / base;
    let text = format!("25% mask MSE {ours:.4} vs mean fill {base:.4} ({:.1}% lower)", gain * 100.0);
    if gain >= 0.30 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn ablation_direction() -> Outcome {
    let ds = etth1()?;
    let full_run = desk_forecast_run();
    let (_, full) = train::<f32>(&full_run, &ds, None).map_err(err)?;
    let reference = full.best_val_mse();
    let mut parts = Vec::new();
    for a in Ablation::ALL {
        let mut run = full_run.clone();
        run.model.ablation = Some(a);
        let (_, out) = train::<f32>(&run, &ds, None).map_err(err)?;
        let v = out.best_val_mse();
        let line = format!("{a} val {v:.4} vs full {reference:.4}");
        parts.push(if v >= reference - 0.005 { Ok(line) } else { Err(line) });
    }
    all(parts)
}

fn checkpoint_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.hgtf");
    let run = desk_forecast_run();
    let mut small = run.clone();
    small.model.d_model = 64;
    small.model.d_ff = 128;
    let model = HgtsFormer::<f32>::new(small.model.clone(), 5).map_err(err)?;
    save_checkpoint(&path, &model, &small).map_err(err)?;
    let (back, _) = load_checkpoint::<f32>(&path).map_err(err)?;
    let ds = Dataset::new(&synthetic_ett(3000, 7, 3), &SplitPreset::Ratio { train: 0.6, val: 0.2 }).map_err(err)?;
    let x: Tensor<f32> = ds.gather(&[0, 100], 672).map_err(err)?;
    let (g1, g2) = (Graph::inference(), Graph::inference());
    let a = g1.value(model.forward(&g1, &x, None).map_err(err)?.head);
    let b = g2.value(back.forward(&g2, &x, None).map_err(err)?.head);
    let identical = a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits());
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let cuts = [0, 3, 11, bytes.len() / 2, bytes.len() - 1];
    let truncated = cuts.iter().all(|&c| matches!(decode(&bytes[..c]), Err(HgtsError::Format(_))));
    let flips = (0..64).map(|i| i * (bytes.len() / 64)).all(|i| {
        let mut bad = bytes.clone();
        bad[i] ^= 0x40;
        matches!(decode(&bad), Err(HgtsError::Format(_)))
    });
    std::fs::write(&path, &bytes[..bytes.len() - 9]).map_err(|e| e.to_string())?;
    let on_load = matches!(load_checkpoint::<f32>(&path), Err(HgtsError::Format(_)));
    let text = format!(
        "forward bit-identical {identical}; truncations rejected {truncated}; corruptions rejected {flips}; load of truncated file rejected {on_load}"
    );
    if identical && truncated && flips && on_load {
        Ok(text)
    } else {
        Err(text)
    }
}

fn cli_contract() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_hgts");
    let status = Command::new(bin)
        .args(["verify", "--suite", "all"])
        .output()
        .map_err(|e| e.to_string())?
        .status;
    let verify = if status.success() {
        Ok("verify --suite all exit 0".to_string())
    } else {
        Err(format!("verify --suite all exited {status}"))
    };
    all(vec![verify, inspect_etth1(bin)])
}

/// Dumps block-0 intra graphs for the shipped ETTh1 config and checks
/// their shape and column sums.
fn inspect_etth1(bin: &str) -> Outcome {
    let data = etth1_path()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = RunConfig::load(&workspace().join("configs/etth1.cfg")).map_err(err)?;
    let model = HgtsFormer::<f32>::new(run.model.clone(), run.train.seed).map_err(err)?;
    let ckpt = dir.path().join("etth1.hgtf");
    save_checkpoint(&ckpt, &model, &run).map_err(err)?;
    let out = dir.path().join("inspect");
    let status = Command::new(bin)
        .args(["inspect", "--window-index", "0", "--ckpt"])
        .arg(&ckpt)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    if !status.success() {
        return Err(format!("inspect exited {status}"));
    }
    let text = std::fs::read_to_string(out.join("block0_intra_ch0_incidence.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    let (e, n) = (rows.len(), rows.first().map_or(0, Vec::len));
    let sums: Vec<f64> = (0..n).map(|c| rows.iter().map(|r| r[c]).sum()).collect();
    let line = format!("inspect block-0 intra {e}×{n}, column sums {:?}", sums.iter().fold(Vec::new(), |mut u, &s| {
        if !u.contains(&s) {
            u.push(s);
        }
        u
    }));
    if (e, n) == (7, 14) && sums.iter().all(|&s| s == 2.0) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", gradient_correctness),
        ("hypergraph oracle equivalence", hypergraph_oracle),
        ("structural invariants", structural_invariants),
        ("parameter count", parameter_count),
        ("desk-scale forecasting", desk_forecasting),
        ("desk-scale imputation", desk_imputation),
        ("ablation direction", ablation_direction),
        ("checkpoint round-trip", checkpoint_round_trip),
        ("CLI contract", cli_contract),
    ];
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {id} {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {id} {name}: {msg} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria passed", if only.is_some() { "selected" } else { "9" });
}
