//! Wall-clock scaling of the map + pack pipeline.

use std::time::Instant;

use crate::mapping::{map_set, MappingConfig, MappingError};
use crate::packing::{discretize, pack, GridConfig, PackError};
use crate::synth::{generate, SynthError, SynthSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("no sizes to benchmark")]
    NoSizes,
    #[error("benchmark sizes must be >= 1")]
    ZeroSize,
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Packing(#[from] PackError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Fastest of the repeats, in seconds.
    pub seconds: f64,
}

/// Times mapping and packing of `template`-shaped sets of each size.
///
/// Each size is generated from `template` with `n` replaced; generation is
/// not timed. The fastest of `repeats` runs is reported.
pub fn time_pipeline(
    sizes: &[usize],
    template: &SynthSpec,
    mapping: &MappingConfig,
    grid: &GridConfig,
    repeats: usize,
) -> Result<Vec<BenchRow>, BenchError> {
    if sizes.is_empty() {
        return Err(BenchError::NoSizes);
    }
    if sizes.contains(&0) {
        return Err(BenchError::ZeroSize);
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let set = generate(&SynthSpec { n, ..template.clone() })?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let uv = map_set(&set, mapping)?;
            let tensor = pack(&set, &discretize(&uv, grid), grid, mapping.strategy)?;
            let elapsed = start.elapsed().as_secs_f64();
            std::hint::black_box(&tensor);
            best = best.min(elapsed);
        }
        rows.push(BenchRow { n, seconds: best });
    }
    Ok(rows)
}

/// `seconds[i+1] / seconds[i]` for consecutive rows.
pub fn growth_ratios(rows: &[BenchRow]) -> Vec<f64> {
    rows.windows(2).map(|w| w[1].seconds / w[0].seconds).collect()
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,seconds\n");
    for r in rows {
        out.push_str(&format!("{},{:.6}\n", r.n, r.seconds));
    }
    out
}
