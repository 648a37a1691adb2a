//! Capacity-utilization metrics for packed UV tensors.

use serde::{Deserialize, Serialize};

use crate::gaussian::GaussianSet;
use crate::mapping::{map_set, ContinuousUv, MappingConfig, MappingError, Strategy};
use crate::packing::{discretize, pack, tally, GridConfig, PackError, UvTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub mapping: Strategy,
    /// `(H, W, K)`.
    pub grid: (usize, usize, usize),
    pub n_input: u64,
    pub non_empty_ratio: f64,
    pub collision_rate: f64,
    pub retention: f64,
    pub max_slot_arrivals: u32,
    pub row_count_stddev: f64,
    pub col_count_stddev: f64,
}

impl UtilizationReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "mapping",
        "height",
        "width",
        "k",
        "n_input",
        "non_empty_ratio",
        "collision_rate",
        "retention",
        "max_slot_arrivals",
        "row_count_stddev",
        "col_count_stddev",
    ];
}

fn population_stddev(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<u64>() as f64 / n;
    let var = values.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

/// Report from raw per-slot arrivals and a capacity `K`.
pub fn utilization_from_raw(
    raw_counts: &[u32],
    height: usize,
    width: usize,
    capacity: usize,
    n_input: u64,
    mapping: Strategy,
) -> UtilizationReport {
    assert_eq!(raw_counts.len(), height * width, "raw counts do not match the grid");
    let mut occupied = 0u64;
    let mut colliding = 0u64;
    let mut retained = 0u64;
    let mut max_arrivals = 0u32;
    let mut rows = vec![0u64; height];
    let mut cols = vec![0u64; width];
    for (s, &r) in raw_counts.iter().enumerate() {
        if r >= 1 {
            occupied += 1;
        }
        if r >= 2 {
            colliding += 1;
        }
        retained += r.min(capacity as u32) as u64;
        max_arrivals = max_arrivals.max(r);
        rows[s / width] += r as u64;
        cols[s % width] += r as u64;
    }
    UtilizationReport {
        mapping,
        grid: (height, width, capacity),
        n_input,
        non_empty_ratio: occupied as f64 / (height * width) as f64,
        collision_rate: if occupied == 0 { 0.0 } else { colliding as f64 / occupied as f64 },
        retention: if n_input == 0 { 1.0 } else { retained as f64 / n_input as f64 },
        max_slot_arrivals: max_arrivals,
        row_count_stddev: population_stddev(&rows),
        col_count_stddev: population_stddev(&cols),
    }
}

pub fn utilization(tensor: &UvTensor) -> UtilizationReport {
    let s = tensor.shape;
    utilization_from_raw(&tensor.raw_counts, s.height, s.width, s.capacity, tensor.n_input, tensor.strategy)
}

/// One report per `K`, all from a single mapping pass.
///
/// Arrivals do not depend on `K`, so only the retention column changes.
pub fn k_sweep(set: &GaussianSet, uv: &ContinuousUv, grid: &GridConfig, k_values: &[usize]) -> Vec<UtilizationReport> {
    assert!(k_values.iter().all(|&k| k >= 1), "K values must be >= 1");
    let raw = tally(&discretize(uv, grid), grid.height, grid.width);
    k_values
        .iter()
        .map(|&k| utilization_from_raw(&raw, grid.height, grid.width, k, set.len() as u64, uv.strategy))
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("no strategies to compare")]
    NoStrategies,
    #[error("mapping failed: {0}")]
    Mapping(#[from] MappingError),
    #[error("packing failed: {0}")]
    Packing(#[from] PackError),
}

/// Maps, packs and reports `set` once per strategy under identical settings.
pub fn compare(
    set: &GaussianSet,
    mapping: &MappingConfig,
    grid: &GridConfig,
    strategies: &[Strategy],
) -> Result<Vec<UtilizationReport>, CompareError> {
    if strategies.is_empty() {
        return Err(CompareError::NoStrategies);
    }
    strategies
        .iter()
        .map(|&strategy| {
            let uv = map_set(set, &mapping.with_strategy(strategy))?;
            let tensor = pack(set, &discretize(&uv, grid), grid, strategy)?;
            Ok(utilization(&tensor))
        })
        .collect()
}
