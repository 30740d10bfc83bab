use std::fmt::Write as _;
use std::ops::Range;

use hgts_tensor::{Element, Tensor};
use rayon::prelude::*;

use crate::data::{eval_windows, make_imputation_mask, sliding_starts, Dataset};
use crate::error::{HgtsError, Result};
use crate::model::{rolling_forecast, HgtsFormer};

pub const DEFAULT_HORIZONS: [usize; 4] = [96, 192, 336, 720];
pub const DEFAULT_RATIOS: [f64; 4] = [0.125, 0.25, 0.375, 0.5];

/// Produces `B×C×horizon` predictions from `B×C×lookback` contexts.
pub trait Forecaster<T: Element>: Sync {
    fn lookback(&self) -> usize;
    fn forecast(&self, context: &Tensor<T>, horizon: usize) -> Result<Tensor<T>>;
}

impl<T: Element> Forecaster<T> for HgtsFormer<T> {
    fn lookback(&self) -> usize {
        self.config().lookback
    }

    fn forecast(&self, context: &Tensor<T>, horizon: usize) -> Result<Tensor<T>> {
        Ok(rolling_forecast(self, context, horizon)?.predictions)
    }
}

/// Fills the hidden points of `B×C×L` windows.
pub trait Imputer<T: Element>: Sync {
    fn window(&self) -> usize;
    /// Hidden entries of `series` are zero on entry.
    fn impute(&self, series: &Tensor<T>, observed: &Tensor<T>) -> Result<Tensor<T>>;
}

impl<T: Element> Imputer<T> for HgtsFormer<T> {
    fn window(&self) -> usize {
        self.config().lookback
    }

    fn impute(&self, series: &Tensor<T>, observed: &Tensor<T>) -> Result<Tensor<T>> {
        HgtsFormer::impute(self, series, observed)
    }
}

/// Repeats each channel's last observed value.
#[derive(Clone, Copy, Debug)]
pub struct RepeatLast {
    pub lookback: usize,
}

impl<T: Element> Forecaster<T> for RepeatLast {
    fn lookback(&self) -> usize {
        self.lookback
    }

    fn forecast(&self, context: &Tensor<T>, horizon: usize) -> Result<Tensor<T>> {
        let [b, c, l] = *context.shape() else {
            return Err(HgtsError::InvalidArgument(format!("context must be B×C×L, got {:?}", context.shape())));
        };
        let data = context.data().chunks(l).flat_map(|row| std::iter::repeat_n(row[l - 1], horizon)).collect();
        Ok(Tensor::new([b, c, horizon], data)?)
    }
}

/// Fills hidden points with a per-channel constant, the training mean.
#[derive(Clone, Debug)]
pub struct MeanFill {
    pub window: usize,
    pub fill: Vec<f64>,
}

impl MeanFill {
    /// Means of the dataset's training range (zero up to rounding, since
    /// values are standardized with training statistics).
    pub fn from_dataset(ds: &Dataset, window: usize) -> Self {
        let r = ds.split.train.clone();
        let fill = ds.values.iter().map(|ch| ch[r.clone()].iter().sum::<f64>() / r.len() as f64).collect();
        MeanFill { window, fill }
    }
}

impl<T: Element> Imputer<T> for MeanFill {
    fn window(&self) -> usize {
        self.window
    }

    fn impute(&self, series: &Tensor<T>, observed: &Tensor<T>) -> Result<Tensor<T>> {
        let [_, c, l] = *series.shape() else {
            return Err(HgtsError::InvalidArgument(format!("series must be B×C×L, got {:?}", series.shape())));
        };
        if c != self.fill.len() {
            return Err(HgtsError::InvalidArgument(format!("{c} channels, {} fill values", self.fill.len())));
        }
        let data = series
            .data()
            .iter()
            .zip(observed.data())
            .enumerate()
            .map(|(i, (&x, &m))| if m != T::zero() { x } else { T::of(self.fill[(i / l) % c]) })
            .collect();
        Ok(Tensor::new(series.shape(), data)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub key: String,
    pub mse: f64,
    pub mae: f64,
    /// Number of scored points.
    pub count: usize,
}

/// Per-horizon or per-ratio errors plus their plain average.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    /// Column name of the key, `horizon` or `ratio`.
    pub label: String,
    pub rows: Vec<MetricRow>,
    pub skipped: Vec<String>,
}

impl MetricReport {
    pub fn new(label: &str) -> Self {
        MetricReport {
            label: label.into(),
            rows: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn avg_mse(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.mse))
    }

    pub fn avg_mae(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.mae))
    }

    pub fn row(&self, key: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    /// `label,mse,mae` rows followed by `avg`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},mse,mae\n", self.label);
        for r in &self.rows {
            writeln!(s, "{},{:.9},{:.9}", r.key, r.mse, r.mae).expect("string write");
        }
        if !self.rows.is_empty() {
            writeln!(s, "avg,{:.9},{:.9}", self.avg_mse(), self.avg_mae()).expect("string write");
        }
        s
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct ErrSums {
    sq: f64,
    abs: f64,
    n: usize,
}

impl ErrSums {
    fn add(&mut self, pred: f64, truth: f64) {
        let e = pred - truth;
        self.sq += e * e;
        self.abs += e.abs();
        self.n += 1;
    }

    fn merge(self, o: ErrSums) -> ErrSums {
        ErrSums {
            sq: self.sq + o.sq,
            abs: self.abs + o.abs,
            n: self.n + o.n,
        }
    }

    fn row(self, key: String) -> MetricRow {
        MetricRow {
            key,
            mse: self.sq / self.n as f64,
            mae: self.abs / self.n as f64,
            count: self.n,
        }
    }
}

/// Which part of the series to score and how densely.
#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub range: Range<usize>,
    pub stride: usize,
    pub batch_size: usize,
    /// Caps the number of windows per row; 0 means all.
    pub max_windows: usize,
    pub seed: u64,
    pub mask_shared: bool,
}

impl EvalOptions {
    pub fn test(ds: &Dataset) -> Self {
        EvalOptions {
            range: ds.split.test.clone(),
            stride: 1,
            batch_size: 32,
            max_windows: 0,
            seed: 2024,
            mask_shared: false,
        }
    }

    fn check(&self) -> Result<()> {
        if self.stride == 0 || self.batch_size == 0 {
            return Err(HgtsError::InvalidArgument("stride and batch size must be positive".into()));
        }
        Ok(())
    }

    fn cap<X>(&self, mut v: Vec<X>) -> Vec<X> {
        if self.max_windows > 0 {
            v.truncate(self.max_windows);
        }
        v
    }
}

/// Rolling forecast over every evaluation window whose target fits inside
/// the range. Horizons that do not fit are skipped with a warning.
pub fn evaluate_forecast<T: Element, F: Forecaster<T> + ?Sized>(
    model: &F,
    ds: &Dataset,
    horizons: &[usize],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    opts.check()?;
    let l = model.lookback();
    let mut report = MetricReport::new("horizon");
    for &h in horizons {
        let windows = opts.cap(eval_windows(opts.range.clone(), l, h, opts.stride));
        if windows.is_empty() {
            log::warn!("horizon {h} does not fit the {}-point evaluation range; skipped", opts.range.len());
            report.skipped.push(h.to_string());
            continue;
        }
        let chunks: Vec<_> = windows.chunks(opts.batch_size).collect();
        let sums = chunks
            .par_iter()
            .map(|chunk| -> Result<ErrSums> {
                let ctx_starts: Vec<usize> = chunk.iter().map(|w| w.context_start).collect();
                let tgt_starts: Vec<usize> = chunk.iter().map(|w| w.target_start).collect();
                let context = ds.gather::<T>(&ctx_starts, l)?;
                let truth = ds.gather::<T>(&tgt_starts, h)?;
                let pred = model.forecast(&context, h)?;
                if pred.shape() != truth.shape() {
                    return Err(HgtsError::InvalidArgument(format!(
                        "forecast {:?} vs truth {:?}",
                        pred.shape(),
                        truth.shape()
                    )));
                }
                let mut s = ErrSums::default();
                for (&p, &t) in pred.data().iter().zip(truth.data()) {
                    s.add(p.as_f64(), t.as_f64());
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let total = sums.into_iter().fold(ErrSums::default(), ErrSums::merge);
        report.rows.push(total.row(h.to_string()));
    }
    Ok(report)
}

/// Masked reconstruction error on windows inside the range, one row per
/// mask ratio. Only hidden points are scored.
pub fn evaluate_imputation<T: Element, I: Imputer<T> + ?Sized>(
    model: &I,
    ds: &Dataset,
    ratios: &[f64],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    opts.check()?;
    let l = model.window();
    let starts = opts.cap(sliding_starts(opts.range.clone(), l, opts.stride));
    if starts.is_empty() {
        return Err(HgtsError::Data(format!(
            "evaluation range of {} points holds no {l}-point window",
            opts.range.len()
        )));
    }
    let c = ds.channels();
    let mut report = MetricReport::new("ratio");
    for (ri, &ratio) in ratios.iter().enumerate() {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(HgtsError::InvalidArgument(format!("mask ratio must lie in (0, 1), got {ratio}")));
        }
        let chunks: Vec<_> = starts.chunks(opts.batch_size).enumerate().collect();
        let sums = chunks
            .par_iter()
            .map(|&(bi, chunk)| -> Result<ErrSums> {
                let truth = ds.gather::<T>(chunk, l)?;
                let seed = opts.seed ^ ((ri as u64) << 32) ^ bi as u64;
                let (observed, hidden) = make_imputation_mask::<T>([chunk.len(), c, l], ratio, seed, opts.mask_shared)?;
                let input = truth.zip_map(&observed, |x, m| x * m)?;
                let pred = model.impute(&input, &observed)?;
                let mut s = ErrSums::default();
                for ((&p, &t), &h) in pred.data().iter().zip(truth.data()).zip(hidden.data()) {
                    if h != T::zero() {
                        s.add(p.as_f64(), t.as_f64());
                    }
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let total = sums.into_iter().fold(ErrSums::default(), ErrSums::merge);
        report.rows.push(total.row(ratio.to_string()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SplitPreset;
    use crate::data::synthetic_ett;

    fn dataset() -> Dataset {
        let table = synthetic_ett(600, 3, 5);
        Dataset::new(&table, &SplitPreset::Ratio { train: 0.6, val: 0.2 }).unwrap()
    }

    /// Looks its answers up in the dataset by matching the context.
    struct Oracle<'a> {
        ds: &'a Dataset,
        lookback: usize,
    }

    impl Oracle<'_> {
        fn locate(&self, row: &[f64]) -> usize {
            let ch = &self.ds.values[0];
            (0..=ch.len() - row.len()).find(|&s| ch[s..s + row.len()] == *row).expect("context present")
        }
    }

    impl Forecaster<f64> for Oracle<'_> {
        fn lookback(&self) -> usize {
            self.lookback
        }

        fn forecast(&self, context: &Tensor<f64>, horizon: usize) -> Result<Tensor<f64>> {
            let [b, c, l] = *context.shape() else { unreachable!() };
            let mut starts = Vec::new();
            for bi in 0..b {
                let row = &context.data()[bi * c * l..bi * c * l + l];
                starts.push(self.locate(row) + l);
            }
            self.ds.gather(&starts, horizon)
        }
    }

    impl Imputer<f64> for Oracle<'_> {
        fn window(&self) -> usize {
            self.lookback
        }

        fn impute(&self, series: &Tensor<f64>, observed: &Tensor<f64>) -> Result<Tensor<f64>> {
            // the first observed run is long enough to be unique on this data
            let [b, c, l] = *series.shape() else { unreachable!() };
            let mut starts = Vec::new();
            for bi in 0..b {
                let row = &series.data()[bi * c * l..bi * c * l + l];
                let obs = &observed.data()[bi * c * l..bi * c * l + l];
                let ch = &self.ds.values[0];
                let s = (0..=ch.len() - l)
                    .find(|&s| (0..l).all(|i| obs[i] == 0.0 || ch[s + i] == row[i]))
                    .expect("window present");
                starts.push(s);
            }
            self.ds.gather(&starts, l)
        }
    }

    #[test]
    fn oracle_forecast_scores_zero_with_avg_row() {
        let ds = dataset();
        let oracle = Oracle { ds: &ds, lookback: 24 };
        let opts = EvalOptions {
            stride: 7,
            ..EvalOptions::test(&ds)
        };
        let r = evaluate_forecast(&oracle, &ds, &[8, 16, 24, 48], &opts).unwrap();
        assert_eq!(r.rows.len(), 4);
        for row in &r.rows {
            assert_eq!((row.mse, row.mae), (0.0, 0.0));
        }
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "horizon,mse,mae");
        assert!(lines[5].starts_with("avg,"));
    }

    #[test]
    fn long_horizons_are_skipped() {
        let ds = dataset();
        let r = evaluate_forecast::<f64, _>(&RepeatLast { lookback: 24 }, &ds, &[8, 500], &EvalOptions::test(&ds)).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.skipped, vec!["500".to_string()]);
        assert!(r.rows[0].mse > 0.0);
    }

    #[test]
    fn oracle_imputation_scores_zero() {
        let ds = dataset();
        let oracle = Oracle { ds: &ds, lookback: 32 };
        let opts = EvalOptions {
            stride: 16,
            ..EvalOptions::test(&ds)
        };
        let r = evaluate_imputation(&oracle, &ds, &DEFAULT_RATIOS, &opts).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().all(|row| row.mse == 0.0 && row.mae == 0.0));
    }

    #[test]
    fn mean_fill_is_near_unit_mse_on_training_range() {
        let ds = dataset();
        let fill = MeanFill::from_dataset(&ds, 32);
        let opts = EvalOptions {
            range: ds.split.train.clone(),
            stride: 8,
            ..EvalOptions::test(&ds)
        };
        let r = evaluate_imputation::<f64, _>(&fill, &ds, &[0.25], &opts).unwrap();
        assert!((r.rows[0].mse - 1.0).abs() < 0.15, "{}", r.rows[0].mse);
    }

    #[test]
    fn average_is_mean_of_rows() {
        let mut r = MetricReport::new("ratio");
        for (i, v) in [0.1, 0.2, 0.7, 0.4].iter().enumerate() {
            r.rows.push(MetricRow {
                key: i.to_string(),
                mse: *v,
                mae: v * 2.0,
                count: 1,
            });
        }
        assert!((r.avg_mse() - 0.35).abs() < 1e-12);
        assert!((r.avg_mae() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_ratio_rejected() {
        let ds = dataset();
        let fill = MeanFill::from_dataset(&ds, 32);
        let err = evaluate_imputation::<f64, _>(&fill, &ds, &[0.0], &EvalOptions::test(&ds)).unwrap_err();
        assert!(matches!(err, HgtsError::InvalidArgument(_)));
    }
}
