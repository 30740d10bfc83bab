use std::ops::Range;

use hgts_tensor::{Element, Tensor};

use super::SeriesTable;
use crate::config::SplitPreset;
use crate::error::{HgtsError, Result};

/// Contiguous train/val/test ranges and train-only channel statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const MONTH_HOURS: usize = 30 * 24;

pub fn chrono_split(table: &SeriesTable, preset: &SplitPreset) -> Result<SplitSpec> {
    let len = table.len();
    let (tr, va, te) = match *preset {
        SplitPreset::EttCalendar { steps_per_hour } => {
            let m = MONTH_HOURS * steps_per_hour;
            (12 * m, 4 * m, 4 * m)
        }
        SplitPreset::Ratio { train, val } => {
            let tr = (len as f64 * train + 1e-9).floor() as usize;
            let va = (len as f64 * val + 1e-9).floor() as usize;
            (tr, va, len.saturating_sub(tr + va))
        }
    };
    if tr + va + te > len || tr < 2 || va == 0 || te == 0 {
        return Err(HgtsError::Data(format!(
            "series of {len} steps is too short for a {tr}/{va}/{te} split"
        )));
    }
    let train = 0..tr;
    let mut mean = Vec::with_capacity(table.channels());
    let mut std = Vec::with_capacity(table.channels());
    for ch in &table.values {
        let xs = &ch[train.clone()];
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        mean.push(m);
        // a constant training channel is only centered
        std.push(if v > 0.0 { v.sqrt() } else { 1.0 });
    }
    Ok(SplitSpec {
        train,
        val: tr..tr + va,
        test: tr + va..tr + va + te,
        mean,
        std,
    })
}

/// A table standardized with its training statistics.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub names: Vec<String>,
    pub timestamps: Vec<i64>,
    /// `C` rows of z-scored values.
    pub values: Vec<Vec<f64>>,
    pub split: SplitSpec,
}

impl Dataset {
    pub fn new(table: &SeriesTable, preset: &SplitPreset) -> Result<Self> {
        let split = chrono_split(table, preset)?;
        let values = table
            .values
            .iter()
            .zip(split.mean.iter().zip(&split.std))
            .map(|(ch, (&m, &s))| ch.iter().map(|v| (v - m) / s).collect())
            .collect();
        Ok(Dataset {
            names: table.names.clone(),
            timestamps: table.timestamps.clone(),
            values,
            split,
        })
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// `B×C×len` tensor of the windows starting at `starts`.
    pub fn gather<T: Element>(&self, starts: &[usize], len: usize) -> Result<Tensor<T>> {
        let c = self.channels();
        let mut data = Vec::with_capacity(starts.len() * c * len);
        for &s in starts {
            if s + len > self.len() {
                return Err(HgtsError::Data(format!(
                    "window [{s}, {}) exceeds series length {}",
                    s + len,
                    self.len()
                )));
            }
            for ch in &self.values {
                data.extend(ch[s..s + len].iter().map(|&v| T::of(v)));
            }
        }
        Ok(Tensor::new([starts.len(), c, len], data)?)
    }
}
