//! Command-line front end: `train`, `forecast`, `impute`, `inspect` and
//! `verify`.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 data
//! error (including unreadable or damaged checkpoints), 4 numeric
//! divergence. Human messages go to stderr; stdout lists produced files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, Task};
use crate::data::{eval_windows, load_csv, sliding_starts, Dataset};
use crate::error::{HgtsError, Result};
use crate::harness::{
    evaluate_forecast, evaluate_imputation, load_checkpoint, sidecar_path, train, EvalOptions, Forecaster, Imputer,
    MeanFill, RepeatLast, DEFAULT_HORIZONS, DEFAULT_RATIOS,
};
use crate::data::make_imputation_mask;
use crate::model::HgtsFormer;
use crate::plot::{heatmap, line_chart, Series};
use crate::verify::{self, Suite, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "hgts", version, about = "Hierarchical hypergraph transformer for multivariate time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and keep the best epoch by validation MSE.
    Train(TrainArgs),
    /// Rolling forecast evaluation on the test split.
    Forecast(ForecastArgs),
    /// Masked reconstruction evaluation on the test split.
    Impute(ImputeArgs),
    /// Dump the hypergraphs sampled for one test window.
    Inspect(InspectArgs),
    /// Run the built-in gradient, invariant and oracle checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Forecast,
    Impute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotMode {
    None,
    /// Last channel only.
    Last,
    All,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's task (and causality with it).
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Optimizer steps per epoch; 0 means a full pass.
    #[arg(long)]
    pub max_batches: Option<usize>,
    #[arg(long)]
    pub train_stride: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Distance between evaluation windows.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Caps windows per row; 0 means all.
    #[arg(long, default_value_t = 0)]
    pub max_windows: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = PlotMode::Last)]
    pub plots: PlotMode,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HORIZONS)]
    pub horizons: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct ImputeArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATIOS)]
    pub ratios: Vec<f64>,
    /// Mask seed.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Index among the test split's windows, one per time step.
    #[arg(long, default_value_t = 0)]
    pub window_index: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Also write `verify.tsv` (and a manifest) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// Process exit code for an error.
pub fn exit_code(e: &HgtsError) -> i32 {
    match e {
        HgtsError::Config(_) => 2,
        HgtsError::Data(_) | HgtsError::Format(_) | HgtsError::Integrity(_) => 3,
        e if e.is_numeric() => 4,
        _ => 1,
    }
}

pub fn version_string() -> String {
    match option_env!("HGTS_GIT_DESCRIBE") {
        Some(d) => d.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Entry point used by the binary; returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(outputs) => {
            for p in outputs {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HGTS_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HgtsError::Config(format!("HGTS_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HgtsError::Config(format!("thread pool: {e}")))
}

/// Runs one command and returns the files it produced.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Forecast(a) => cmd_forecast(&a),
        Command::Impute(a) => cmd_impute(&a),
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

/// Index of a command's inputs and outputs, written before any work.
struct Manifest {
    dir: PathBuf,
    command: String,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: String,
}

impl Manifest {
    fn path(&self) -> PathBuf {
        self.dir.join("manifest.txt")
    }

    fn render(&self, status: Option<&str>) -> String {
        let mut s = format!("command = {}\nversion = hgts {}\nstarted = {}\n", self.command, version_string(), self.started);
        if let Some(seed) = self.seed {
            s += &format!("seed = {seed}\n");
        }
        s += "config = config.cfg\n";
        for p in &self.inputs {
            s += &format!("input = {}\n", p.display());
        }
        for p in &self.outputs {
            s += &format!("output = {}\n", p.display());
        }
        if let Some(st) = status {
            s += &format!("finished = {}\nstatus = {st}\n", now());
        }
        s
    }

    fn begin(dir: &Path, command: &str, seed: Option<u64>, inputs: &[&Path], config: &RunConfig, outputs: Vec<PathBuf>) -> Result<Self> {
        let mut all = vec![dir.join("config.cfg")];
        all.extend(outputs);
        let m = Manifest {
            dir: dir.to_path_buf(),
            command: command.into(),
            seed,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: all,
            started: now(),
        };
        write(&dir.join("config.cfg"), &config.to_text())?;
        write(&m.path(), &m.render(None))?;
        Ok(m)
    }

    /// Records the outcome; a successful run must have produced every
    /// listed output.
    fn finish<T>(self, result: Result<T>) -> Result<Vec<PathBuf>> {
        let result = result.and_then(|_| {
            match self.outputs.iter().find(|p| !p.exists()) {
                Some(p) => Err(HgtsError::InvalidArgument(format!("listed output {} was not produced", p.display()))),
                None => Ok(()),
            }
        });
        let status = match &result {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("failed (exit {}): {e}", exit_code(e)),
        };
        write(&self.path(), &self.render(Some(&status)))?;
        result?;
        let mut out = self.outputs;
        out.push(self.dir.join("manifest.txt"));
        Ok(out)
    }
}

fn now() -> String {
    chrono::DateTime::<chrono::Utc>::from(std::time::SystemTime::now())
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HgtsError::io(path, e))
}

fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(|e| HgtsError::io(dir, e))?.next().is_some();
        if occupied && !force {
            return Err(HgtsError::InvalidArgument(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| HgtsError::io(dir, e))
}

fn as_data_error(e: HgtsError) -> HgtsError {
    match e {
        HgtsError::Io { path, source } => HgtsError::Data(format!("{path}: {source}")),
        e => e,
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).map_err(|e| match e {
        HgtsError::Io { path, source } => HgtsError::Config(format!("{path}: {source}")),
        e => e,
    })
}

fn load_dataset(path: &Path, run: &RunConfig) -> Result<Dataset> {
    let table = load_csv(path).map_err(as_data_error)?;
    if table.channels() != run.model.channels {
        return Err(HgtsError::Data(format!(
            "{} has {} channels, the config expects {}",
            path.display(),
            table.channels(),
            run.model.channels
        )));
    }
    Dataset::new(&table, &run.data.split)
}

fn load_model(path: &Path) -> Result<(HgtsFormer<f32>, RunConfig)> {
    load_checkpoint::<f32>(path).map_err(as_data_error)
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn plotted_channels(mode: PlotMode, channels: usize) -> Vec<usize> {
    match mode {
        PlotMode::None => Vec::new(),
        PlotMode::Last => vec![channels - 1],
        PlotMode::All => (0..channels).collect(),
    }
}

fn cmd_train(a: &TrainArgs) -> Result<Vec<PathBuf>> {
    let mut run = load_config(&a.config)?;
    if let Some(t) = a.task {
        run.model.task = match t {
            TaskArg::Forecast => Task::Forecast,
            TaskArg::Impute => Task::Impute,
        };
        run.model.causal = run.model.task == Task::Forecast;
    }
    if let Some(s) = a.seed {
        run.train.seed = s;
    }
    if let Some(e) = a.epochs {
        run.train.epochs = e;
    }
    if let Some(m) = a.max_batches {
        run.train.max_batches = m;
    }
    if let Some(s) = a.train_stride {
        run.train.train_stride = s;
    }
    run.model.validate()?;
    run.train.validate()?;
    let ds = load_dataset(&a.data, &run)?;
    prepare_out(&a.out, a.force)?;
    let ckpt = a.out.join("model.hgtf");
    let outputs = vec![
        ckpt.clone(),
        sidecar_path(&ckpt),
        a.out.join("metrics.csv"),
        a.out.join("timing.csv"),
        a.out.join("loss_curve.svg"),
    ];
    let manifest = Manifest::begin(&a.out, "train", Some(run.train.seed), &[&a.config, &a.data], &run, outputs)?;
    let result = (|| -> Result<()> {
        let (_, out) = train::<f32>(&run, &ds, Some(&ckpt))?;
        write(&a.out.join("metrics.csv"), &out.to_csv())?;
        write(&a.out.join("timing.csv"), &out.timing_csv())?;
        let train_loss: Vec<f64> = out.epochs.iter().map(|e| e.train_loss).collect();
        let val: Vec<f64> = out.epochs.iter().map(|e| e.val_mse).collect();
        let svg = line_chart(
            &format!("{}: loss per epoch (best {})", run.name, out.best_epoch),
            "epoch",
            &[
                Series { label: "train", x0: 0, values: &train_loss },
                Series { label: "validation", x0: 0, values: &val },
            ],
            &[],
        );
        write(&a.out.join("loss_curve.svg"), &svg)?;
        log::info!(
            "best epoch {} with validation MSE {:.6}; {:.4} s/iter",
            out.best_epoch,
            out.best_val_mse(),
            out.secs_per_iter
        );
        Ok(())
    })();
    manifest.finish(result)
}

fn eval_options(ds: &Dataset, a: &EvalArgs, stride: usize, seed: u64, run: &RunConfig) -> Result<EvalOptions> {
    if a.batch_size == 0 || stride == 0 {
        return Err(HgtsError::Config("--batch-size and --stride must be positive".into()));
    }
    Ok(EvalOptions {
        range: ds.split.test.clone(),
        stride,
        batch_size: a.batch_size,
        max_windows: a.max_windows,
        seed,
        mask_shared: run.data.mask_shared,
    })
}

fn cmd_forecast(a: &ForecastArgs) -> Result<Vec<PathBuf>> {
    let e = &a.eval;
    if a.horizons.is_empty() || a.horizons.contains(&0) {
        return Err(HgtsError::Config("horizons must be positive".into()));
    }
    let (model, run) = load_model(&e.ckpt)?;
    if !run.model.causal {
        return Err(HgtsError::Config(format!("{} holds a non-causal model; use impute", e.ckpt.display())));
    }
    let ds = load_dataset(&e.data, &run)?;
    let opts = eval_options(&ds, e, e.stride.unwrap_or(1), 0, &run)?;
    let l = run.model.lookback;
    let fits: Vec<usize> = a
        .horizons
        .iter()
        .copied()
        .filter(|&h| !eval_windows(opts.range.clone(), l, h, 1).is_empty())
        .collect();
    let channels = plotted_channels(e.plots, ds.channels());
    prepare_out(&e.out, e.force)?;
    let plot_path = |h: usize, c: usize| e.out.join(format!("forecast_h{h}_{}.svg", file_safe(&ds.names[c])));
    let mut outputs = vec![e.out.join("forecast.csv"), e.out.join("baseline_repeat_last.csv")];
    for &h in &fits {
        outputs.extend(channels.iter().map(|&c| plot_path(h, c)));
    }
    let manifest = Manifest::begin(&e.out, "forecast", None, &[&e.ckpt, &e.data], &run, outputs)?;
    let result = (|| -> Result<()> {
        let report = evaluate_forecast(&model, &ds, &a.horizons, &opts)?;
        write(&e.out.join("forecast.csv"), &report.to_csv())?;
        let base = evaluate_forecast::<f32, _>(&RepeatLast { lookback: l }, &ds, &a.horizons, &opts)?;
        write(&e.out.join("baseline_repeat_last.csv"), &base.to_csv())?;
        for row in &report.rows {
            log::info!("horizon {}: mse {:.4} mae {:.4}", row.key, row.mse, row.mae);
        }
        for &h in &fits {
            let w = eval_windows(opts.range.clone(), l, h, 1)[0];
            let context = ds.gather::<f32>(&[w.context_start], l)?;
            let pred = model.forecast(&context, h)?;
            let truth = ds.gather::<f32>(&[w.context_start], l + h)?;
            for &c in &channels {
                let shown = (2 * h).min(l);
                let t: Vec<f64> = truth.data()[c * (l + h)..(c + 1) * (l + h)][l - shown..].iter().map(|&v| v as f64).collect();
                let p: Vec<f64> = pred.data()[c * h..(c + 1) * h].iter().map(|&v| v as f64).collect();
                let svg = line_chart(
                    &format!("{} horizon {h}, channel {}", run.name, ds.names[c]),
                    "time step",
                    &[
                        Series { label: "ground truth", x0: 0, values: &t },
                        Series { label: "prediction", x0: shown, values: &p },
                    ],
                    &[],
                );
                write(&plot_path(h, c), &svg)?;
            }
        }
        Ok(())
    })();
    manifest.finish(result)
}

fn cmd_impute(a: &ImputeArgs) -> Result<Vec<PathBuf>> {
    let e = &a.eval;
    if a.ratios.is_empty() {
        return Err(HgtsError::Config("at least one mask ratio is needed".into()));
    }
    if let Some(r) = a.ratios.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(HgtsError::Config(format!("mask ratio {r} must lie strictly between 0 and 1")));
    }
    let (model, run) = load_model(&e.ckpt)?;
    if run.model.causal {
        return Err(HgtsError::Config(format!("{} holds a causal model; use forecast", e.ckpt.display())));
    }
    let ds = load_dataset(&e.data, &run)?;
    let l = run.model.lookback;
    let opts = eval_options(&ds, e, e.stride.unwrap_or((l / 8).max(1)), a.seed, &run)?;
    let first = sliding_starts(opts.range.clone(), l, 1);
    if first.is_empty() {
        return Err(HgtsError::Data(format!("test split of {} points is shorter than the window {l}", opts.range.len())));
    }
    let channels = plotted_channels(e.plots, ds.channels());
    prepare_out(&e.out, e.force)?;
    let plot_path = |r: f64, c: usize| e.out.join(format!("impute_r{r}_{}.svg", file_safe(&ds.names[c])));
    let mut outputs = vec![e.out.join("imputation.csv"), e.out.join("baseline_mean_fill.csv")];
    for &r in &a.ratios {
        outputs.extend(channels.iter().map(|&c| plot_path(r, c)));
    }
    let manifest = Manifest::begin(&e.out, "impute", Some(a.seed), &[&e.ckpt, &e.data], &run, outputs)?;
    let result = (|| -> Result<()> {
        let report = evaluate_imputation(&model, &ds, &a.ratios, &opts)?;
        write(&e.out.join("imputation.csv"), &report.to_csv())?;
        let fill = MeanFill::from_dataset(&ds, l);
        let base = evaluate_imputation::<f32, _>(&fill, &ds, &a.ratios, &opts)?;
        write(&e.out.join("baseline_mean_fill.csv"), &base.to_csv())?;
        for row in &report.rows {
            log::info!("ratio {}: mse {:.4} mae {:.4}", row.key, row.mse, row.mae);
        }
        let truth = ds.gather::<f32>(&first[..1], l)?;
        for (ri, &r) in a.ratios.iter().enumerate() {
            let (observed, _) =
                make_imputation_mask::<f32>([1, ds.channels(), l], r, a.seed ^ ri as u64, run.data.mask_shared)?;
            let input = truth.zip_map(&observed, |x, m| x * m)?;
            let filled = Imputer::impute(&model, &input, &observed)?;
            for &c in &channels {
                let row = c * l..(c + 1) * l;
                let t: Vec<f64> = truth.data()[row.clone()].iter().map(|&v| v as f64).collect();
                let f: Vec<f64> = filled.data()[row.clone()].iter().map(|&v| v as f64).collect();
                let hidden: Vec<usize> = observed.data()[row].iter().enumerate().filter(|(_, &m)| m == 0.0).map(|(i, _)| i).collect();
                let svg = line_chart(
                    &format!("{} mask ratio {r}, channel {}", run.name, ds.names[c]),
                    "time step (shaded: hidden)",
                    &[
                        Series { label: "ground truth", x0: 0, values: &t },
                        Series { label: "imputed", x0: 0, values: &f },
                    ],
                    &hidden,
                );
                write(&plot_path(r, c), &svg)?;
            }
        }
        Ok(())
    })();
    manifest.finish(result)
}

fn cmd_inspect(a: &InspectArgs) -> Result<Vec<PathBuf>> {
    let (model, run) = load_model(&a.ckpt)?;
    let ds = load_dataset(&a.data, &run)?;
    let cfg = &run.model;
    let starts = sliding_starts(ds.split.test.clone(), cfg.lookback, 1);
    let Some(&start) = starts.get(a.window_index) else {
        return Err(HgtsError::Data(format!(
            "window index {} out of range; the test split holds {} windows",
            a.window_index,
            starts.len()
        )));
    };
    prepare_out(&a.out, a.force)?;
    let c = ds.channels();
    let mut planned: Vec<(usize, &str, Option<usize>)> = Vec::new();
    for b in 0..cfg.layers {
        if cfg.has_intra() {
            planned.extend((0..c).map(|ch| (b, "intra", Some(ch))));
        }
        if cfg.has_inter() {
            planned.push((b, "inter", None));
        }
    }
    let stem = |b: usize, kind: &str, ch: Option<usize>, which: &str| match ch {
        Some(ch) => a.out.join(format!("block{b}_{kind}_ch{ch}_{which}")),
        None => a.out.join(format!("block{b}_{kind}_{which}")),
    };
    let mut outputs = Vec::new();
    for &(b, kind, ch) in &planned {
        for which in ["confidence", "incidence", "mask"] {
            outputs.push(stem(b, kind, ch, which).with_extension("csv"));
        }
        for which in ["confidence", "incidence"] {
            outputs.push(stem(b, kind, ch, which).with_extension("svg"));
        }
    }
    let manifest = Manifest::begin(&a.out, "inspect", None, &[&a.ckpt, &a.data], &run, outputs)?;
    let result = (|| -> Result<()> {
        let x = ds.gather::<f32>(&[start], cfg.lookback)?;
        let g = hgts_tensor::Graph::inference();
        let out = model.forward(&g, &x, None)?;
        for &(b, kind, ch) in &planned {
            let st = match kind {
                "intra" => out.structures[b].intra.as_ref(),
                _ => out.structures[b].inter.as_ref(),
            }
            .ok_or_else(|| HgtsError::InvalidArgument(format!("block {b} has no {kind} graph")))?;
            let s = ch.unwrap_or(0);
            for which in ["confidence", "incidence", "mask"] {
                write(&stem(b, kind, ch, which).with_extension("csv"), &st.to_csv(which, s)?)?;
            }
            for which in ["confidence", "incidence"] {
                let label = match ch {
                    Some(ch) => format!("block {b} {kind} {which}, channel {}", ds.names[ch]),
                    None => format!("block {b} {kind} {which}"),
                };
                let svg = heatmap(&label, &st.matrix(which, s)?, "hyperedges", "nodes");
                write(&stem(b, kind, ch, which).with_extension("svg"), &svg)?;
            }
            if ch.is_none_or(|c| c == 0) {
                log::info!("block {b} {kind}: {}×{} per slice, k = {}", st.rows(), st.cols(), st.k);
            }
        }
        Ok(())
    })();
    manifest.finish(result)
}

fn cmd_verify(a: &VerifyArgs) -> Result<Vec<PathBuf>> {
    let suite: Suite = a.suite.parse().map_err(|e: HgtsError| HgtsError::Config(e.to_string()))?;
    let opts = VerifyOptions {
        draws: a.draws,
        seed: a.seed,
        ..VerifyOptions::default()
    };
    let mut outputs = Vec::new();
    if let Some(dir) = &a.out {
        prepare_out(dir, a.force)?;
        outputs.push(dir.join("verify.tsv"));
        write(
            &dir.join("manifest.txt"),
            &format!(
                "command = verify\nversion = hgts {}\nstarted = {}\nsuite = {suite}\nseed = {}\noutput = {}\n",
                version_string(),
                now(),
                a.seed,
                dir.join("verify.tsv").display()
            ),
        )?;
    }
    let report = verify::run(suite, &opts);
    let tsv = report.to_tsv();
    print!("{tsv}");
    if let Some(dir) = &a.out {
        write(&dir.join("verify.tsv"), &tsv)?;
        outputs.push(dir.join("manifest.txt"));
    }
    if !report.passed() {
        return Err(HgtsError::InvalidArgument(format!("{} verification check(s) failed", report.failures())));
    }
    Ok(outputs)
}
