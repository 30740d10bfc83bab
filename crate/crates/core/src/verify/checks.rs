//! Randomized checks behind `verify`. Each returns the worst observed
//! discrepancy together with the tolerance it is held to.

use hgts_tensor::gradcheck::check_params;
use hgts_tensor::{Graph, ParamStore, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{edge_to_node_dense_oracle, hga_dense_oracle};
use crate::config::{Ablation, DataConfig, LossTokens, ModelConfig, RunConfig, Task, TopkAxis, TrainConfig};
use crate::data::{synthetic_ett, Dataset};
use crate::error::Result;
use crate::harness::train;
use crate::hypergraph::{build_structure, hga_aggregate, EdgeToNode, HgaBlock};
use crate::model::{count_parameters, forecast_loss, imputation_loss, rolling_forecast, HgtsFormer};
use crate::nn::{instance_norm, denormalize, Ctx, Mhsa, ParamInit, RopeCache};

/// Worst discrepancy over `draws` trials and the bound it must stay within.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    pub worst: f64,
    pub tol: f64,
    pub draws: usize,
}

impl Measure {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).expect("shape matches data")
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The gradient-check configuration: B1, C2, L8, P4, D8, H2, E4, one layer.
pub fn micro_config(task: Task) -> ModelConfig {
    ModelConfig {
        layers: 1,
        d_model: 8,
        d_ff: 16,
        heads: 2,
        patch_len: 4,
        lookback: 8,
        edge_num: 4,
        channels: 2,
        alpha: -1e4,
        causal: task == Task::Forecast,
        task,
        topk_axis: TopkAxis::PerNode,
        ablation: None,
        rope_base: 10000.0,
        norm_eps: 1e-5,
        ln_eps: 1e-5,
        init_std: 0.5,
    }
}

fn hga_block(store: &mut ParamStore<f64>, seed: u64, d: usize, heads: usize) -> Result<HgaBlock> {
    let mut init = ParamInit::new(store, seed, 0.4);
    Ok(HgaBlock {
        wq: init.linear("wq", d, d)?,
        wk: init.linear("wk", d, d)?,
        wv: init.linear("wv", d, d)?,
        ffn: init.ffn("ffn", d, 2 * d)?,
        ln1: init.layer_norm("ln1", d, 1e-5)?,
        ln2: init.layer_norm("ln2", d, 1e-5)?,
        heads,
    })
}

/// Central-difference step. Key-projection biases have an exactly zero
/// gradient (softmax ignores a per-row shift), so their numeric estimate is
/// pure rounding noise growing like 1/h; 3e-5 keeps both that noise and
/// the truncation error of curved directions well under 1e-4.
pub const FD_STEP: f64 = 3e-5;

/// Finite differences against the tape for every parameter of the micro
/// model, forecasting and imputation losses, `seeds` initializations each.
pub fn gradients(seeds: usize, seed: u64) -> Result<Measure> {
    let mut worst = 0.0f64;
    let mut r = rng(seed);
    for s in 0..seeds as u64 {
        for task in [Task::Forecast, Task::Impute] {
            let mut model = HgtsFormer::<f64>::new(micro_config(task), seed + s)?;
            let shell = model.clone();
            let report = match task {
                Task::Forecast => {
                    let window = random(&mut r, &[1, 2, 12], 1.0);
                    check_params(model.params_mut(), FD_STEP, |g, store| {
                        let mut m = shell.clone();
                        m.load_params(store).map_err(|e| TensorError::InvalidArgument(e.to_string()))?;
                        forecast_loss(&m, g, &window, LossTokens::All).map_err(|e| TensorError::InvalidArgument(e.to_string()))
                    })?
                }
                Task::Impute => {
                    let window = random(&mut r, &[1, 2, 8], 1.0);
                    let observed = Tensor::from_f64(
                        [1, 2, 8],
                        &[1., 0., 1., 1., 0., 1., 1., 1., 1., 1., 0., 1., 1., 1., 0., 1.],
                    )?;
                    check_params(model.params_mut(), FD_STEP, |g, store| {
                        let mut m = shell.clone();
                        m.load_params(store).map_err(|e| TensorError::InvalidArgument(e.to_string()))?;
                        imputation_loss(&m, g, &window, &observed).map_err(|e| TensorError::InvalidArgument(e.to_string()))
                    })?
                }
            };
            worst = worst.max(report.max_rel_error);
        }
    }
    Ok(Measure {
        worst,
        tol: 1e-4,
        draws: seeds * 2,
    })
}

/// Every parameter of the full model receives a nonzero gradient. Worst
/// is the number of parameters left without one.
pub fn gradient_flow(seed: u64) -> Result<Measure> {
    let mut dead = 0usize;
    let mut r = rng(seed);
    for task in [Task::Forecast, Task::Impute] {
        let mut model = HgtsFormer::<f64>::new(micro_config(task), seed)?;
        let g = Graph::new();
        let loss = match task {
            Task::Forecast => forecast_loss(&model, &g, &random(&mut r, &[2, 2, 12], 1.0), LossTokens::All)?,
            Task::Impute => {
                let obs = Tensor::from_f64([1, 2, 8], &[1., 0., 1., 1., 0., 1., 1., 1., 1., 1., 0., 1., 1., 1., 0., 1.])?;
                imputation_loss(&model, &g, &random(&mut r, &[1, 2, 8], 1.0), &obs)?
            }
        };
        let grads = g.backward(loss)?;
        let store = model.params_mut();
        store.zero_grad();
        grads.accumulate_into(store)?;
        dead += store.iter().filter(|(_, p)| p.grad().data().iter().all(|&v| v == 0.0)).count();
    }
    Ok(Measure {
        worst: dead as f64,
        tol: 0.0,
        draws: 2,
    })
}

/// Incidence has exactly `k` ones per node column (per-node TopK) or per
/// hyperedge row (per-hyperedge TopK), with `k = floor(E/3)` for intra
/// graphs. Worst is the number of violating columns or rows.
pub fn topk_cardinality(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut bad = 0usize;
    for i in 0..draws {
        let (s, e, n, d) = (r.random_range(1..4), r.random_range(4..16), r.random_range(1..20), r.random_range(1..9));
        let q = random(&mut r, &[e, d], 2.0);
        let x = random(&mut r, &[s, n, d], 2.0);
        let k = e / 3;
        let axis = if i % 2 == 0 { TopkAxis::PerNode } else { TopkAxis::PerHyperedge };
        let k = if axis == TopkAxis::PerHyperedge { k.min(n) } else { k };
        let st = build_structure(&q, &x, -1e9, k, axis)?;
        for si in 0..s {
            let sums = match axis {
                TopkAxis::PerNode => st.column_sums(si),
                TopkAxis::PerHyperedge => st.row_sums(si),
            };
            bad += sums.iter().filter(|&&v| v != k).count();
        }
        bad += usize::from(st.check().is_err());
    }
    Ok(Measure {
        worst: bad as f64,
        tol: 0.0,
        draws,
    })
}

/// Rotation preserves norms, and query-key products depend only on the
/// position offset.
pub fn rope(draws: usize, seed: u64) -> Result<(Measure, Measure)> {
    let mut r = rng(seed);
    let (mut iso, mut rel) = (0.0f64, 0.0f64);
    for _ in 0..draws {
        let dh = 2 * r.random_range(1..17);
        let cache = RopeCache::<f64>::new(128, dh, 10000.0)?;
        let q: Vec<f64> = (0..dh).map(|_| r.random_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..dh).map(|_| r.random_range(-1.0..1.0)).collect();
        let (m, n, shift) = (r.random_range(0..64), r.random_range(0..64), r.random_range(0..64));
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        iso = iso.max((norm(&cache.rotate_vec(&q, m)) - norm(&q)).abs());
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let a = dot(&cache.rotate_vec(&q, m), &cache.rotate_vec(&k, n));
        let b = dot(&cache.rotate_vec(&q, m + shift), &cache.rotate_vec(&k, n + shift));
        rel = rel.max((a - b).abs());
    }
    Ok((
        Measure {
            worst: iso,
            tol: 1e-5,
            draws,
        },
        Measure {
            worst: rel,
            tol: 1e-5,
            draws,
        },
    ))
}

/// Normalizing then denormalizing returns the input.
pub fn revin_round_trip(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let shape = [r.random_range(1..4), r.random_range(1..6), r.random_range(2..40)];
        let (scale, offset) = (10f64.powf(r.random_range(-2.0..2.0)), r.random_range(-50.0..50.0));
        let x = random(&mut r, &shape, 1.0).map(|v| v * scale + offset);
        let (xn, stats) = instance_norm(&x, None, 1e-5)?;
        let back = denormalize(&xn, &stats)?;
        worst = worst.max(max_abs(back.data(), x.data()));
    }
    Ok(Measure {
        worst,
        tol: 1e-6,
        draws,
    })
}

/// Causal self-attention outputs before position `t` ignore any change at
/// or after `t`.
pub fn causal_prefix(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..draws {
        let heads = r.random_range(1..3);
        let d = heads * 2 * r.random_range(1..4);
        let n = r.random_range(2..12);
        let mut store = ParamStore::<f64>::new();
        let mut init = ParamInit::new(&mut store, seed ^ i as u64, 0.4);
        let m = Mhsa {
            wq: init.linear("q", d, d)?,
            wk: init.linear("k", d, d)?,
            wv: init.linear("v", d, d)?,
            wp: init.linear("p", d, d)?,
            heads,
            causal: true,
        };
        let rope = RopeCache::new(n, d / heads, 10000.0)?;
        let x = random(&mut r, &[2, n, d], 1.0);
        let t = r.random_range(1..n);
        let mut x2 = x.clone();
        for b in 0..2 {
            for v in &mut x2.data_mut()[(b * n + t) * d..(b + 1) * n * d] {
                *v += r.random_range(-3.0..3.0);
            }
        }
        let run = |x: &Tensor<f64>| -> Result<Tensor<f64>> {
            let g = Graph::inference();
            let cx = Ctx::new(&g, &store);
            let v = g.constant(x.clone());
            Ok((*g.value(m.forward(&cx, v, Some(&rope))?)).clone())
        };
        let (a, b) = (run(&x)?, run(&x2)?);
        for bi in 0..2 {
            let p = (bi * n) * d..(bi * n + t) * d;
            worst = worst.max(max_abs(&a.data()[p.clone()], &b.data()[p]));
        }
    }
    Ok(Measure {
        worst,
        tol: 1e-6,
        draws,
    })
}

fn small_forecaster(seed: u64) -> Result<HgtsFormer<f64>> {
    let cfg = ModelConfig {
        lookback: 16,
        init_std: 0.1,
        ..micro_config(Task::Forecast)
    };
    HgtsFormer::new(cfg, seed)
}

/// Rolling forecasts depend on the last `lookback` points only.
pub fn rollout_context(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let model = small_forecaster(seed)?;
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let extra = r.random_range(1..20);
        let long = random(&mut r, &[1, 2, 16 + extra], 1.0);
        let short: Vec<f64> = long.data().chunks(16 + extra).flat_map(|row| row[extra..].to_vec()).collect();
        let short = Tensor::new([1, 2, 16], short)?;
        let h = r.random_range(1..13);
        let a = rolling_forecast(&model, &long, h)?.predictions;
        let b = rolling_forecast(&model, &short, h)?.predictions;
        worst = worst.max(max_abs(a.data(), b.data()));
    }
    Ok(Measure {
        worst,
        tol: 0.0,
        draws,
    })
}

/// Same seed, same parameters and outputs, bit for bit; different seeds
/// differ. Worst counts violations.
pub fn seed_determinism(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut bad = 0usize;
    for _ in 0..draws {
        let s = r.random::<u64>();
        let a = small_forecaster(s)?;
        let b = small_forecaster(s)?;
        let c = small_forecaster(s ^ 1)?;
        let same = a.params().iter().zip(b.params().iter()).all(|((_, p), (_, q))| p.value() == q.value());
        let differs = a.params().iter().zip(c.params().iter()).any(|((_, p), (_, q))| p.value() != q.value());
        let x = random(&mut r, &[1, 2, 16], 1.0);
        let fa = rolling_forecast(&a, &x, 8)?.predictions;
        let fb = rolling_forecast(&b, &x, 8)?.predictions;
        let bits = |t: &Tensor<f64>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        bad += usize::from(!same) + usize::from(!differs) + usize::from(bits(&fa) != bits(&fb));
    }
    Ok(Measure {
        worst: bad as f64,
        tol: 0.0,
        draws,
    })
}

/// Two short training runs with one seed give identical step losses.
pub fn train_determinism(seed: u64) -> Result<Measure> {
    let model = ModelConfig {
        channels: 3,
        ..ModelConfig::tiny(3)
    };
    let run = RunConfig {
        name: "determinism".into(),
        model,
        train: TrainConfig {
            epochs: 2,
            batch_size: 4,
            train_stride: 16,
            lr: 1e-3,
            seed,
            max_batches: 3,
            val_windows: 4,
            ..TrainConfig::default()
        },
        data: DataConfig::default(),
    };
    let ds = Dataset::new(&synthetic_ett(300, 3, seed), &run.data.split)?;
    let (_, a) = train::<f32>(&run, &ds, None)?;
    let (_, b) = train::<f32>(&run, &ds, None)?;
    let bad = a.step_losses.iter().zip(&b.step_losses).filter(|(x, y)| x.to_bits() != y.to_bits()).count()
        + usize::from(a.step_losses.len() != b.step_losses.len());
    Ok(Measure {
        worst: bad as f64,
        tol: 0.0,
        draws: 1,
    })
}

/// Attention mass on non-member nodes never grows as the mask value gets
/// more negative. Worst is the largest increase seen.
pub fn soft_mask_monotonic(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let alphas = [0.0, -0.5, -1.0, -2.0, -5.0, -10.0, -100.0, -1e4, -1e9];
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let (e, n) = (r.random_range(1..6), r.random_range(2..10));
        let x = random(&mut r, &[e, n], 3.0);
        let member: Vec<bool> = (0..e * n).map(|i| i % n == 0 || r.random_bool(0.4)).collect();
        let mut prev = vec![f64::INFINITY; e];
        for &a in &alphas {
            let g = Graph::<f64>::inference();
            let bias = Tensor::new([e, n], member.iter().map(|&m| if m { 0.0 } else { a }).collect())?;
            let w = g.value(g.softmax_lastdim(g.constant(x.clone()), Some(g.constant(bias)))?);
            for row in 0..e {
                let outside: f64 = (0..n).filter(|&j| !member[row * n + j]).map(|j| w.data()[row * n + j]).sum();
                worst = worst.max(outside - prev[row]);
                prev[row] = outside;
            }
        }
    }
    Ok(Measure {
        worst: worst.max(0.0),
        tol: 1e-12,
        draws,
    })
}

/// Reordering hyperedge queries reorders the aggregated hyperedges the
/// same way.
pub fn query_permutation(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..draws {
        let (e, n, d) = (r.random_range(4..8), r.random_range(2..10), 2 * r.random_range(1..5));
        let mut store = ParamStore::new();
        let block = hga_block(&mut store, seed ^ i as u64, d, 1 + usize::from(d % 4 == 0))?;
        let q = random(&mut r, &[1, e, d], 1.0);
        let x = random(&mut r, &[1, n, d], 1.0);
        let mut perm: Vec<usize> = (0..e).collect();
        for j in (1..e).rev() {
            perm.swap(j, r.random_range(0..=j));
        }
        let mut qp = q.clone();
        for (dst, &src) in perm.iter().enumerate() {
            qp.data_mut()[dst * d..(dst + 1) * d].copy_from_slice(&q.data()[src * d..(src + 1) * d]);
        }
        let run = |q: &Tensor<f64>| -> Result<Tensor<f64>> {
            let st = build_structure(q, &x, -1e9, e / 3, TopkAxis::PerNode)?;
            let g = Graph::inference();
            let cx = Ctx::new(&g, &store);
            let out = hga_aggregate(&cx, &block, g.constant(q.clone()), g.constant(x.clone()), &st.mask)?;
            Ok((*g.value(out)).clone())
        };
        let (a, b) = (run(&q)?, run(&qp)?);
        for (dst, &src) in perm.iter().enumerate() {
            worst = worst.max(max_abs(&b.data()[dst * d..(dst + 1) * d], &a.data()[src * d..(src + 1) * d]));
        }
    }
    Ok(Measure {
        worst,
        tol: 1e-9,
        draws,
    })
}

/// `hga_aggregate` against the member-restricted loop reference.
pub fn hga_oracle(instances: usize, alpha: f64, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let (s, e, n) = (r.random_range(1..4), r.random_range(1..6), r.random_range(1..10));
        let d = 2 * r.random_range(1..5);
        let mut store = ParamStore::new();
        let block = hga_block(&mut store, seed ^ (i as u64 + 1), d, 1)?;
        let q = random(&mut r, &[if i % 2 == 0 { 1 } else { s }, e, d], 1.0);
        let x = random(&mut r, &[s, n, d], 1.0);
        let axis = if i % 3 == 2 { TopkAxis::PerHyperedge } else { TopkAxis::PerNode };
        let k = match axis {
            TopkAxis::PerNode => r.random_range(1..=e),
            TopkAxis::PerHyperedge => r.random_range(1..=n),
        };
        let st = build_structure(&q, &x, alpha, k, axis)?;
        let g = Graph::inference();
        let cx = Ctx::new(&g, &store);
        let out = hga_aggregate(&cx, &block, g.constant(q.clone()), g.constant(x.clone()), &st.mask)?;
        let want = hga_dense_oracle(&store, &block, &q, &x, &st.incidence)?;
        worst = worst.max(max_abs(g.value(out).data(), want.data()));
    }
    Ok(Measure {
        worst,
        tol: 1e-5,
        draws: instances,
    })
}

/// `EdgeToNode` against the loop reference.
pub fn edge_to_node_oracle(instances: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let heads = r.random_range(1..3);
        let d = heads * 2 * r.random_range(1..4);
        let (b, m, c) = (r.random_range(1..3), r.random_range(1..12), r.random_range(1..5));
        let mut store = ParamStore::new();
        let mut init = ParamInit::new(&mut store, seed ^ (i as u64 + 7), 0.4);
        let block = EdgeToNode {
            wq: init.linear("wq", d, d)?,
            wk: init.linear("wk", d, d)?,
            wv: init.linear("wv", d, d)?,
            wp: init.linear("wp", d, d)?,
            ffn: init.ffn("ffn", d, 3 * d)?,
            ln1: init.layer_norm("ln1", d, 1e-5)?,
            ln2: init.layer_norm("ln2", d, 1e-5)?,
            heads,
        };
        let tokens = random(&mut r, &[b, m, d], 1.0);
        let edges = random(&mut r, &[b, c, d], 1.0);
        let g = Graph::inference();
        let cx = Ctx::new(&g, &store);
        let out = block.forward(&cx, g.constant(tokens.clone()), g.constant(edges.clone()))?;
        let want = edge_to_node_dense_oracle(&store, &block, &tokens, &edges)?;
        worst = worst.max(max_abs(g.value(out).data(), want.data()));
    }
    Ok(Measure {
        worst,
        tol: 1e-9,
        draws: instances,
    })
}

/// A random valid configuration, small enough to instantiate.
pub fn random_config(r: &mut ChaCha8Rng) -> ModelConfig {
    let heads = r.random_range(1..4);
    let patch = r.random_range(2..5);
    let task = if r.random_bool(0.5) { Task::Forecast } else { Task::Impute };
    let ablation = match r.random_range(0..5) {
        i @ 0..3 => Some(Ablation::ALL[i]),
        _ => None,
    };
    ModelConfig {
        layers: r.random_range(0..3),
        d_model: heads * 2 * r.random_range(1..4),
        d_ff: r.random_range(1..20),
        heads,
        patch_len: patch,
        lookback: patch * r.random_range(1..6),
        edge_num: r.random_range(4..10),
        channels: r.random_range(1..6),
        causal: task == Task::Forecast,
        task,
        ablation,
        ..micro_config(task)
    }
}

/// Closed-form parameter count against the instantiated model. Worst is
/// the largest absolute difference.
pub fn count_matches_enumeration(draws: usize, seed: u64) -> Result<Measure> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let cfg = random_config(&mut r);
        let built = HgtsFormer::<f32>::new(cfg.clone(), 0)?.num_parameters();
        worst = worst.max((built as f64 - count_parameters(&cfg) as f64).abs());
    }
    Ok(Measure {
        worst,
        tol: 0.0,
        draws,
    })
}
