//! Capacity-aware UV mapping for 3D Gaussian splat sets.
//!
//! A [`GaussianSet`] is mapped to continuous UV coordinates by one of three
//! strategies ([`Strategy`]), discretized onto an `H × W` grid and packed into
//! a [`UvTensor`] holding at most `K` Gaussians per slot, highest opacity
//! first. [`metrics`] measures how well the fixed `H·W·K` budget is used.
//!
//! ```
//! use uvgs_core::{generate, map_set, discretize, pack, utilization};
//! use uvgs_core::{GridConfig, MappingConfig, Strategy, SynthSpec};
//!
//! let set = generate(&SynthSpec::vmf(4, 20.0, 2_000, 7)).unwrap();
//! let grid = GridConfig::new(32, 32, 1);
//! let uv = map_set(&set, &MappingConfig::new(Strategy::RankOt)).unwrap();
//! let tensor = pack(&set, &discretize(&uv, &grid), &grid, Strategy::RankOt).unwrap();
//! let report = utilization(&tensor);
//! assert!(report.retention > 0.0);
//! ```

pub mod bench;
pub mod formats;
pub mod gaussian;
pub mod mapping;
pub mod metrics;
pub mod packing;
pub mod ply;
pub mod synth;

pub use formats::{read_tensor, write_heatmap, write_report, write_tensor, FormatError, HeatmapMode, ReportFormat};
pub use gaussian::{Gaussian, GaussianSet, OriginPolicy};
pub use mapping::{
    he_uv, map_set, rank_normalize, rank_ot_uv, resolve_center, spherical_uv, to_angles, to_direction,
    AngularCoordinates, ContinuousUv, MappingConfig, MappingError, Strategy,
};
pub use metrics::{compare, k_sweep, utilization, UtilizationReport};
pub use packing::{discretize, pack, top_k_retain, Channel, GridConfig, PackError, UvAssignment, UvTensor};
pub use ply::{load_ply, write_ply, PlyError};
pub use synth::{generate, SynthKind, SynthSpec};
