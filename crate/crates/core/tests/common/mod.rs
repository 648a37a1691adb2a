#![allow(dead_code)]

use std::path::PathBuf;

use uvgs_core::{Gaussian, GaussianSet, GridConfig, Strategy, UvAssignment, UvTensor};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Three Gaussians; the first two share slot (0, 0) of a 2x2 grid, the
/// third lands in (1, 1).
pub fn fixture_set() -> GaussianSet {
    let specs: [([f32; 3], f32); 3] = [([1.0, 2.0, 3.0], 0.25), ([-1.0, 0.5, 2.0], 1.5), ([0.0, -2.0, -1.0], -0.75)];
    let gs = specs
        .iter()
        .enumerate()
        .map(|(i, &(p, o))| {
            let mut g = Gaussian::neutral(p, o, 3, i as u64);
            g.scale = [-1.0, -2.0, -3.0];
            g.rotation = [0.5, 0.5, -0.5, 0.5];
            g.appearance = vec![0.1 * (i + 1) as f32, -0.2, 0.3];
            g
        })
        .collect();
    GaussianSet::new(gs, 3).unwrap()
}

pub fn fixture_assignment() -> UvAssignment {
    UvAssignment { row: vec![0, 0, 1], col: vec![0, 0, 1] }
}

pub fn fixture_tensor(k: usize) -> UvTensor {
    uvgs_core::pack(&fixture_set(), &fixture_assignment(), &GridConfig::new(2, 2, k), Strategy::RankOt).unwrap()
}

/// Single vertex at (1, 2, 3) with opacity 0.5 and neutral payload.
pub fn single_vertex_set() -> GaussianSet {
    GaussianSet::new(vec![Gaussian::neutral([1.0, 2.0, 3.0], 0.5, 0, 0)], 0).unwrap()
}

/// Exact integer slot of rank `r` (1-based) among `n` on `cells` cells.
pub fn rank_cell(r: usize, n: usize, cells: usize) -> usize {
    ((r * cells) / n).min(cells - 1)
}
