use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SeriesTable;

/// Hourly series with daily and weekly cycles, slow drift, channel
/// coupling and AR(1) noise, shaped like an electricity-transformer table.
///
/// Only for examples and smoke tests; it is not a benchmark dataset.
pub fn synthetic_ett(len: usize, channels: usize, seed: u64) -> SeriesTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let start = 1_467_331_200; // 2016-07-01 00:00:00 UTC
    let tau = std::f64::consts::TAU;
    let base: Vec<f64> = (0..len)
        .map(|t| {
            let h = t as f64;
            (tau * h / 24.0).sin() + 0.4 * (tau * h / 168.0).cos() + 0.3 * (tau * h / 12.0 + 0.5).sin()
        })
        .collect();
    let mut values = Vec::with_capacity(channels);
    for c in 0..channels {
        let gain = 0.6 + 0.25 * c as f64;
        let phase = 0.7 * c as f64;
        let level = 5.0 + 2.0 * c as f64;
        let mut ar = 0.0;
        let row = (0..len)
            .map(|t| {
                let h = t as f64;
                ar = 0.8 * ar + 0.15 * noise.sample(&mut rng);
                level
                    + gain * base[t]
                    + 0.5 * (tau * h / 24.0 + phase).cos()
                    + 0.3 * (h / len.max(1) as f64)
                    + ar
            })
            .collect();
        values.push(row);
    }
    SeriesTable {
        timestamps: (0..len as i64).map(|t| start + 3600 * t).collect(),
        names: (0..channels).map(|c| format!("ch{c}")).collect(),
        values,
    }
}
