//! Series ingestion, chronological splits, window sampling and
//! imputation masks.

mod mask;
mod split;
mod synthetic;
mod table;
mod windows;

pub use mask::make_imputation_mask;
pub use split::{chrono_split, Dataset, SplitSpec};
pub use synthetic::synthetic_ett;
pub use table::{load_csv, SeriesTable};
pub use windows::{batches, eval_windows, sliding_starts, EvalWindow, WindowBatch};
