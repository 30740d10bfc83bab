//! Model, training and data configuration plus the sectioned `key = value`
//! file format used by `configs/*.cfg` and checkpoint sidecars.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{HgtsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Forecast,
    Impute,
}

impl FromStr for Task {
    type Err = HgtsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forecast" => Ok(Task::Forecast),
            "impute" => Ok(Task::Impute),
            _ => Err(HgtsError::Config(format!("unknown task {s:?} (forecast|impute)"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Forecast => "forecast",
            Task::Impute => "impute",
        })
    }
}

/// Which axis TopK selects over when sampling the incidence matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TopkAxis {
    /// Every node joins its k most confident hyperedges.
    #[default]
    PerNode,
    /// Every hyperedge keeps its k most confident nodes.
    PerHyperedge,
}

impl FromStr for TopkAxis {
    type Err = HgtsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_node" => Ok(TopkAxis::PerNode),
            "per_hyperedge" => Ok(TopkAxis::PerHyperedge),
            _ => Err(HgtsError::Config(format!("unknown topk_axis {s:?} (per_node|per_hyperedge)"))),
        }
    }
}

impl fmt::Display for TopkAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopkAxis::PerNode => "per_node",
            TopkAxis::PerHyperedge => "per_hyperedge",
        })
    }
}

/// A single removed component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    NoMhsaRope,
    NoIntra,
    NoInter,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::NoMhsaRope, Ablation::NoIntra, Ablation::NoInter];
}

impl FromStr for Ablation {
    type Err = HgtsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_mhsa_rope" => Ok(Ablation::NoMhsaRope),
            "no_intra" => Ok(Ablation::NoIntra),
            "no_inter" => Ok(Ablation::NoInter),
            _ => Err(HgtsError::InvalidArgument(format!(
                "unknown ablation {s:?} (no_mhsa_rope|no_intra|no_inter)"
            ))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::NoMhsaRope => "no_mhsa_rope",
            Ablation::NoIntra => "no_intra",
            Ablation::NoInter => "no_inter",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTokens {
    All,
    Last,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrSchedule {
    Cosine,
    Constant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub heads: usize,
    pub patch_len: usize,
    pub lookback: usize,
    pub edge_num: usize,
    /// Channel count the model is built for (the Q_G projection is shared,
    /// but structure sizes and inspection depend on it).
    pub channels: usize,
    pub alpha: f64,
    pub causal: bool,
    pub task: Task,
    pub topk_axis: TopkAxis,
    pub ablation: Option<Ablation>,
    pub rope_base: f64,
    pub norm_eps: f64,
    pub ln_eps: f64,
    pub init_std: f64,
}

impl ModelConfig {
    /// Reduced forecasting shape that trains in seconds.
    pub fn tiny(channels: usize) -> Self {
        ModelConfig {
            layers: 1,
            d_model: 16,
            d_ff: 32,
            heads: 2,
            patch_len: 8,
            lookback: 32,
            edge_num: 4,
            channels,
            alpha: -1e4,
            causal: true,
            task: Task::Forecast,
            topk_axis: TopkAxis::PerNode,
            ablation: None,
            rope_base: 10000.0,
            norm_eps: 1e-5,
            ln_eps: 1e-5,
            init_std: 0.02,
        }
    }

    pub fn tokens(&self) -> usize {
        self.lookback / self.patch_len
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn k_intra(&self) -> usize {
        self.edge_num / 3
    }

    pub fn k_inter(&self) -> usize {
        (self.channels / 3).max(1)
    }

    pub fn has_mhsa(&self) -> bool {
        self.ablation != Some(Ablation::NoMhsaRope)
    }

    pub fn has_intra(&self) -> bool {
        self.ablation != Some(Ablation::NoIntra)
    }

    pub fn has_inter(&self) -> bool {
        self.ablation != Some(Ablation::NoInter)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("heads", self.heads),
            ("patch_len", self.patch_len),
            ("lookback", self.lookback),
            ("channels", self.channels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(HgtsError::Config(format!("{name} must be positive")));
            }
        }
        if self.edge_num <= 3 {
            return Err(HgtsError::Config(format!(
                "edge_num must be greater than 3 (got {}), since k = floor(edge_num/3) must be at least 1",
                self.edge_num
            )));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(HgtsError::Config(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if !self.head_dim().is_multiple_of(2) {
            return Err(HgtsError::Config(format!(
                "head dimension {} must be even for rotary embedding",
                self.head_dim()
            )));
        }
        if !self.lookback.is_multiple_of(self.patch_len) {
            return Err(HgtsError::Config(format!(
                "lookback {} is not divisible by patch_len {}",
                self.lookback, self.patch_len
            )));
        }
        if self.lookback < 2 {
            return Err(HgtsError::Config("lookback must be at least 2".into()));
        }
        if !(self.alpha.is_finite() && self.alpha <= 0.0) {
            return Err(HgtsError::Config(format!("alpha must be finite and <= 0, got {}", self.alpha)));
        }
        if self.topk_axis == TopkAxis::PerHyperedge && self.k_intra() > self.tokens() {
            return Err(HgtsError::Config(format!(
                "per-hyperedge TopK needs k={} <= tokens {}",
                self.k_intra(),
                self.tokens()
            )));
        }
        for (name, v) in [("rope_base", self.rope_base), ("norm_eps", self.norm_eps), ("ln_eps", self.ln_eps), ("init_std", self.init_std)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(HgtsError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub grad_clip: f64,
    pub loss_tokens: LossTokens,
    pub train_stride: usize,
    /// Caps optimizer steps per epoch; 0 means a full pass.
    pub max_batches: usize,
    /// Caps validation windows; 0 means all.
    pub val_windows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            lr_schedule: LrSchedule::Cosine,
            batch_size: 32,
            epochs: 10,
            seed: 1,
            grad_clip: 5.0,
            loss_tokens: LossTokens::All,
            train_stride: 1,
            max_batches: 0,
            val_windows: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(HgtsError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.train_stride == 0 {
            return Err(HgtsError::Config("batch_size, epochs and train_stride must be positive".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(HgtsError::Config("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitPreset {
    /// 12/4/4 months; `steps_per_hour` is 1 for hourly files, 4 for 15-minute files.
    EttCalendar { steps_per_hour: usize },
    Ratio { train: f64, val: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub split: SplitPreset,
    pub mask_shared: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            split: SplitPreset::Ratio { train: 0.6, val: 0.2 },
            mask_shared: false,
        }
    }
}

/// Everything one config file describes.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

/// Parsed sections of a config file, in file order per key.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(HgtsError::Config(format!("line {}: unterminated section header", i + 1)));
                };
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(HgtsError::Config(format!("line {}: expected key = value, got {line:?}", i + 1)));
            };
            let key = k.trim().to_string();
            let value = v.split('#').next().unwrap_or("").trim().to_string();
            if key.is_empty() {
                return Err(HgtsError::Config(format!("line {}: empty key", i + 1)));
            }
            let sec = sections.entry(current.clone()).or_default();
            if sec.insert(key.clone(), value).is_some() {
                return Err(HgtsError::Config(format!("line {}: duplicate key {key}", i + 1)));
            }
        }
        Ok(ConfigFile { sections })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.get(name)
    }
}

struct Section<'a> {
    name: &'a str,
    map: BTreeMap<String, String>,
}

impl<'a> Section<'a> {
    fn new(file: &ConfigFile, name: &'a str) -> Self {
        Section {
            name,
            map: file.section(name).cloned().unwrap_or_default(),
        }
    }

    fn take<V: FromStr>(&mut self, key: &str) -> Result<Option<V>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                HgtsError::Config(format!("[{}] {key}: cannot parse {v:?}", self.name))
            }),
        }
    }

    fn take_or<V: FromStr>(&mut self, key: &str, default: V) -> Result<V> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn require<V: FromStr>(&mut self, key: &str) -> Result<V> {
        self.take(key)?
            .ok_or_else(|| HgtsError::Config(format!("[{}] missing required key {key}", self.name)))
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.map.keys().next() {
            return Err(HgtsError::Config(format!("[{}] unknown key {k}", self.name)));
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HgtsError::Config(format!("expected boolean, got {s:?}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HgtsError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file = ConfigFile::parse(text)?;
        for name in file.sections.keys() {
            if !["", "run", "model", "train", "data"].contains(&name.as_str()) {
                return Err(HgtsError::Config(format!("unknown section [{name}]")));
            }
        }
        if file.section("").is_some_and(|s| !s.is_empty()) {
            return Err(HgtsError::Config("keys must appear inside a section".into()));
        }

        let mut run = Section::new(&file, "run");
        let name = run.take_or("name", String::from("unnamed"))?;
        run.finish()?;

        let mut m = Section::new(&file, "model");
        let task: Task = m.take_or("task", Task::Forecast)?;
        let causal = match m.take::<String>("causal")? {
            Some(s) => parse_bool(&s)?,
            None => task == Task::Forecast,
        };
        let ablation = match m.take::<String>("ablation")?.as_deref() {
            None | Some("none") => None,
            Some(s) => Some(s.parse().map_err(|e: HgtsError| HgtsError::Config(e.to_string()))?),
        };
        let model = ModelConfig {
            layers: m.require("layers")?,
            d_model: m.require("d_model")?,
            d_ff: m.require("d_ff")?,
            heads: m.require("heads")?,
            patch_len: m.require("patch_len")?,
            lookback: m.require("lookback")?,
            edge_num: m.require("edge_num")?,
            channels: m.require("channels")?,
            alpha: m.take_or("alpha", -1e4)?,
            causal,
            task,
            topk_axis: m.take_or("topk_axis", TopkAxis::PerNode)?,
            ablation,
            rope_base: m.take_or("rope_base", 10000.0)?,
            norm_eps: m.take_or("norm_eps", 1e-5)?,
            ln_eps: m.take_or("ln_eps", 1e-5)?,
            init_std: m.take_or("init_std", 0.02)?,
        };
        m.finish()?;
        model.validate()?;

        let mut t = Section::new(&file, "train");
        let d = TrainConfig::default();
        let lr_schedule = match t.take_or("lradj", String::from("cosine"))?.as_str() {
            "cosine" => LrSchedule::Cosine,
            "constant" => LrSchedule::Constant,
            s => return Err(HgtsError::Config(format!("unknown lradj {s:?}"))),
        };
        let loss: String = t.take_or("loss", String::from("mse"))?;
        if loss != "mse" {
            return Err(HgtsError::Config(format!("unsupported loss {loss:?} (mse)")));
        }
        let loss_tokens = match t.take_or("loss_tokens", String::from("all"))?.as_str() {
            "all" => LossTokens::All,
            "last" => LossTokens::Last,
            s => return Err(HgtsError::Config(format!("unknown loss_tokens {s:?} (all|last)"))),
        };
        let train = TrainConfig {
            lr: t.require("lr")?,
            lr_schedule,
            batch_size: t.require("batch_size")?,
            epochs: t.require("epochs")?,
            seed: t.take_or("seed", d.seed)?,
            grad_clip: t.take_or("grad_clip", d.grad_clip)?,
            loss_tokens,
            train_stride: t.take_or("train_stride", d.train_stride)?,
            max_batches: t.take_or("max_batches", d.max_batches)?,
            val_windows: t.take_or("val_windows", d.val_windows)?,
        };
        t.finish()?;
        train.validate()?;

        let mut s = Section::new(&file, "data");
        let split = match s.take_or("split", String::from("ratio"))?.as_str() {
            "ett_hourly" => SplitPreset::EttCalendar { steps_per_hour: 1 },
            "ett_minutely" => SplitPreset::EttCalendar { steps_per_hour: 4 },
            "ratio" => {
                let tr: f64 = s.take_or("train_ratio", 0.6)?;
                let va: f64 = s.take_or("val_ratio", 0.2)?;
                if !(tr > 0.0 && va > 0.0 && tr + va < 1.0) {
                    return Err(HgtsError::Config(format!("bad split ratios {tr}/{va}")));
                }
                SplitPreset::Ratio { train: tr, val: va }
            }
            x => return Err(HgtsError::Config(format!("unknown split {x:?}"))),
        };
        let mask_shared = match s.take::<String>("mask_shared")? {
            Some(v) => parse_bool(&v)?,
            None => false,
        };
        s.finish()?;

        Ok(RunConfig {
            name,
            model,
            train,
            data: DataConfig { split, mask_shared },
        })
    }

    /// Serializes in the same format `parse` reads.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "[run]\nname = {}\n", self.name);
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "task = {}", m.task);
        let _ = writeln!(s, "layers = {}", m.layers);
        let _ = writeln!(s, "d_model = {}", m.d_model);
        let _ = writeln!(s, "d_ff = {}", m.d_ff);
        let _ = writeln!(s, "heads = {}", m.heads);
        let _ = writeln!(s, "patch_len = {}", m.patch_len);
        let _ = writeln!(s, "lookback = {}", m.lookback);
        let _ = writeln!(s, "edge_num = {}", m.edge_num);
        let _ = writeln!(s, "channels = {}", m.channels);
        let _ = writeln!(s, "alpha = {:?}", m.alpha);
        let _ = writeln!(s, "causal = {}", m.causal);
        let _ = writeln!(s, "topk_axis = {}", m.topk_axis);
        let _ = writeln!(s, "ablation = {}", m.ablation.map_or("none".to_string(), |a| a.to_string()));
        let _ = writeln!(s, "rope_base = {:?}", m.rope_base);
        let _ = writeln!(s, "norm_eps = {:?}", m.norm_eps);
        let _ = writeln!(s, "ln_eps = {:?}", m.ln_eps);
        let _ = writeln!(s, "init_std = {:?}\n", m.init_std);
        let _ = writeln!(s, "[train]");
        let _ = writeln!(s, "lradj = {}", match t.lr_schedule {
            LrSchedule::Cosine => "cosine",
            LrSchedule::Constant => "constant",
        });
        let _ = writeln!(s, "lr = {:?}", t.lr);
        let _ = writeln!(s, "loss = mse");
        let _ = writeln!(s, "loss_tokens = {}", match t.loss_tokens {
            LossTokens::All => "all",
            LossTokens::Last => "last",
        });
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "grad_clip = {:?}", t.grad_clip);
        let _ = writeln!(s, "train_stride = {}", t.train_stride);
        let _ = writeln!(s, "max_batches = {}", t.max_batches);
        let _ = writeln!(s, "val_windows = {}\n", t.val_windows);
        let _ = writeln!(s, "[data]");
        match &self.data.split {
            SplitPreset::EttCalendar { steps_per_hour: 1 } => {
                let _ = writeln!(s, "split = ett_hourly");
            }
            SplitPreset::EttCalendar { .. } => {
                let _ = writeln!(s, "split = ett_minutely");
            }
            SplitPreset::Ratio { train, val } => {
                let _ = writeln!(s, "split = ratio\ntrain_ratio = {train:?}\nval_ratio = {val:?}");
            }
        }
        let _ = writeln!(s, "mask_shared = {}", self.data.mask_shared);
        s
    }
}
