//! Continuous UV coordinates for Gaussian sets.
//!
//! Three strategies share the same directional front end (center, normalize,
//! azimuth/polar angles) and differ only in how angles become `(u, v)`:
//!
//! * [`Strategy::Spherical`]: affine plate carrée, `u = (θ+π)/2π`, `v = φ/π`.
//! * [`Strategy::HistogramEq`]: step CDF of a fixed-domain `B`-bin histogram per angle.
//! * [`Strategy::RankOt`]: `u = rank(θ)/N`, `v = rank(φ)/N`, every Gaussian weighted equally.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaussian::{GaussianSet, OriginPolicy};

/// Positions closer than this to the center have no direction.
pub const DEGENERATE_EPSILON: f64 = 1e-12;
pub const DEFAULT_HE_BINS: usize = 256;

/// Below this many values the rank sorts stay sequential.
const PARALLEL_SORT_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MappingError {
    #[error("position is within {DEGENERATE_EPSILON} of the center")]
    DegenerateDirection,
    #[error("mapping requires at least one gaussian")]
    EmptyInput,
    #[error("histogram equalization needs at least 2 bins, got {0}")]
    InvalidBins(usize),
    #[error("value {index} is not finite")]
    NonFinite { index: usize },
    #[error("{values} values but {keys} tie-break keys")]
    LengthMismatch { values: usize, keys: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Spherical,
    HistogramEq,
    RankOt,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Spherical, Strategy::HistogramEq, Strategy::RankOt];

    /// Short name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            Strategy::Spherical => "spherical",
            Strategy::HistogramEq => "he",
            Strategy::RankOt => "ot",
        }
    }

    /// Name used in reports.
    pub fn report_name(self) -> &'static str {
        match self {
            Strategy::Spherical => "spherical",
            Strategy::HistogramEq => "histogram_eq",
            Strategy::RankOt => "rank_ot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| s == st.short_name() || s == st.report_name())
    }

    /// Tag byte used in tensor files.
    pub fn tag(self) -> u8 {
        match self {
            Strategy::Spherical => 0,
            Strategy::HistogramEq => 1,
            Strategy::RankOt => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub strategy: Strategy,
    pub he_bins: usize,
    pub origin_policy: OriginPolicy,
}

impl MappingConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, he_bins: DEFAULT_HE_BINS, origin_policy: OriginPolicy::Centroid }
    }

    pub fn with_strategy(self, strategy: Strategy) -> Self {
        Self { strategy, ..self }
    }

    pub fn with_origin_policy(self, origin_policy: OriginPolicy) -> Self {
        Self { origin_policy, ..self }
    }

    pub fn with_he_bins(self, he_bins: usize) -> Self {
        Self { he_bins, ..self }
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        if self.he_bins < 2 {
            return Err(MappingError::InvalidBins(self.he_bins));
        }
        Ok(())
    }
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self::new(Strategy::RankOt)
    }
}

/// Azimuth `theta ∈ [−π, π)` and polar angle `phi ∈ [0, π]` per Gaussian.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AngularCoordinates {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Tie-break key of each entry.
    pub source_index: Vec<u64>,
    /// Entries that sat on the center and were assigned `(0, 0)`.
    pub degenerate: usize,
}

impl AngularCoordinates {
    /// Angles keyed by their position in the slices.
    pub fn from_angles(theta: Vec<f64>, phi: Vec<f64>) -> Self {
        let source_index = (0..theta.len() as u64).collect();
        Self { theta, phi, source_index, degenerate: 0 }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// `(u, v) ∈ [0, 1]²` per Gaussian, aligned with the set it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousUv {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub strategy: Strategy,
}

impl ContinuousUv {
    pub fn empty(strategy: Strategy) -> Self {
        Self { u: Vec::new(), v: Vec::new(), strategy }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Unit vector from `center` towards `position`.
pub fn to_direction(position: [f64; 3], center: [f64; 3]) -> Result<[f64; 3], MappingError> {
    let d = [position[0] - center[0], position[1] - center[1], position[2] - center[2]];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if norm.is_nan() || norm <= DEGENERATE_EPSILON {
        return Err(MappingError::DegenerateDirection);
    }
    Ok([d[0] / norm, d[1] / norm, d[2] / norm])
}

/// `(theta, phi)` of a unit vector, with `theta` folded into `[−π, π)`.
pub fn to_angles(direction: [f64; 3]) -> (f64, f64) {
    let mut theta = direction[1].atan2(direction[0]);
    if theta >= PI {
        theta -= 2.0 * PI;
    }
    // atan2 returns -0.0 for a negative-zero y; fold it onto +0.0.
    theta += 0.0;
    let phi = direction[2].clamp(-1.0, 1.0).acos();
    (theta, phi)
}

/// Center used for directions.
pub fn resolve_center(set: &GaussianSet, policy: OriginPolicy) -> Result<[f64; 3], MappingError> {
    match policy {
        OriginPolicy::RawOrigin => Ok([0.0; 3]),
        OriginPolicy::Centroid => {
            if set.is_empty() {
                return Err(MappingError::EmptyInput);
            }
            let mut sum = [0.0f64; 3];
            for g in set.iter() {
                for (s, &p) in sum.iter_mut().zip(&g.position) {
                    *s += p as f64;
                }
            }
            let n = set.len() as f64;
            Ok(sum.map(|s| s / n))
        }
    }
}

/// Angles of every Gaussian around `center`.
///
/// Gaussians sitting on the center get `(0, 0)` and are counted in
/// [`AngularCoordinates::degenerate`].
pub fn angles_of(set: &GaussianSet, center: [f64; 3]) -> AngularCoordinates {
    let n = set.len();
    let mut out = AngularCoordinates {
        theta: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        source_index: Vec::with_capacity(n),
        degenerate: 0,
    };
    for g in set.iter() {
        let p = g.position.map(f64::from);
        let (theta, phi) = match to_direction(p, center) {
            Ok(d) => to_angles(d),
            Err(_) => {
                out.degenerate += 1;
                (0.0, 0.0)
            }
        };
        out.theta.push(theta);
        out.phi.push(phi);
        out.source_index.push(g.source_index);
    }
    if out.degenerate > 0 {
        log::warn!("{} gaussians coincide with the center; assigned theta = phi = 0", out.degenerate);
    }
    out
}

/// Largest double below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn spherical_uv(angles: &AngularCoordinates) -> ContinuousUv {
    // theta < π, but θ + π can round up to 2π; keep u inside [0, 1).
    let u = angles.theta.iter().map(|&t| ((t + PI) / (2.0 * PI)).clamp(0.0, BELOW_ONE)).collect();
    let v = angles.phi.iter().map(|&p| (p / PI).clamp(0.0, 1.0)).collect();
    ContinuousUv { u, v, strategy: Strategy::Spherical }
}

#[inline]
fn ascending(a: &(f64, u64, u32), b: &(f64, u64, u32)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

/// `rank(values[i]) / N`, ranking ascending with ties broken by ascending key.
///
/// The output is a permutation of `{1/N, …, N/N}`.
pub fn rank_normalize(values: &[f64], keys: &[u64]) -> Result<Vec<f64>, MappingError> {
    if values.len() != keys.len() {
        return Err(MappingError::LengthMismatch { values: values.len(), keys: keys.len() });
    }
    let n = values.len();
    if n == 0 {
        return Err(MappingError::EmptyInput);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(MappingError::NonFinite { index });
    }
    let mut order: Vec<(f64, u64, u32)> =
        values.iter().zip(keys).enumerate().map(|(i, (&v, &k))| (v, k, i as u32)).collect();
    // Keys are unique, so the order is total and any sort yields the same result.
    if n >= PARALLEL_SORT_THRESHOLD {
        order.par_sort_unstable_by(ascending);
    } else {
        order.sort_unstable_by(ascending);
    }
    let nf = n as f64;
    let mut out = vec![0.0; n];
    for (rank, &(_, _, i)) in order.iter().enumerate() {
        out[i as usize] = (rank + 1) as f64 / nf;
    }
    Ok(out)
}

pub fn rank_ot_uv(angles: &AngularCoordinates) -> Result<ContinuousUv, MappingError> {
    if angles.is_empty() {
        return Err(MappingError::EmptyInput);
    }
    let (u, v) = rayon::join(
        || rank_normalize(&angles.theta, &angles.source_index),
        || rank_normalize(&angles.phi, &angles.source_index),
    );
    Ok(ContinuousUv { u: u?, v: v?, strategy: Strategy::RankOt })
}

/// Bin of `value` among `bins` equal-width bins over `[lo, lo + span]`.
#[inline]
pub fn histogram_bin(value: f64, lo: f64, span: f64, bins: usize) -> usize {
    let b = ((value - lo) / span * bins as f64).floor();
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

fn equalize(values: &[f64], lo: f64, span: f64, bins: usize) -> Vec<f64> {
    let which: Vec<usize> = values.iter().map(|&x| histogram_bin(x, lo, span, bins)).collect();
    let mut cdf = vec![0usize; bins];
    for &b in &which {
        cdf[b] += 1;
    }
    for i in 1..bins {
        cdf[i] += cdf[i - 1];
    }
    let n = values.len() as f64;
    which.into_iter().map(|b| cdf[b] as f64 / n).collect()
}

/// Independent per-angle histogram equalization over the fixed angle domains.
pub fn he_uv(angles: &AngularCoordinates, bins: usize) -> Result<ContinuousUv, MappingError> {
    if bins < 2 {
        return Err(MappingError::InvalidBins(bins));
    }
    if angles.is_empty() {
        return Err(MappingError::EmptyInput);
    }
    let u = equalize(&angles.theta, -PI, 2.0 * PI, bins);
    let v = equalize(&angles.phi, 0.0, PI, bins);
    Ok(ContinuousUv { u, v, strategy: Strategy::HistogramEq })
}

/// Full mapping pipeline for a set. An empty set maps to an empty result.
pub fn map_set(set: &GaussianSet, config: &MappingConfig) -> Result<ContinuousUv, MappingError> {
    config.validate()?;
    if set.is_empty() {
        return Ok(ContinuousUv::empty(config.strategy));
    }
    let center = resolve_center(set, config.origin_policy)?;
    let angles = angles_of(set, center);
    map_angles(&angles, config)
}

pub fn map_angles(angles: &AngularCoordinates, config: &MappingConfig) -> Result<ContinuousUv, MappingError> {
    match config.strategy {
        Strategy::Spherical => Ok(spherical_uv(angles)),
        Strategy::HistogramEq => he_uv(angles, config.he_bins),
        Strategy::RankOt => rank_ot_uv(angles),
    }
}
