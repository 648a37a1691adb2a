//! Deterministic synthetic Gaussian sets.
//!
//! Every generator draws from a `ChaCha8Rng` seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`, in this stream order:
//!
//! 1. `VmfClusters` without explicit means: one mean direction per cluster,
//!    drawn like a `UniformSphere` direction.
//! 2. Per Gaussian, in index order: the cluster index (`VmfClusters` only,
//!    `random_range(0..clusters)`), the direction, then the opacity.
//!
//! A uniform direction is three `StandardNormal` draws normalized (redrawn if
//! the norm is below 1e-12). A vMF direction is one uniform `f64` for the
//! cosine to the mean, inverted in closed form, and one for the azimuth
//! around it. Output is reproducible for a given release of this crate and
//! its pinned `rand` family; other implementations will not match bit for bit.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gaussian::{Gaussian, GaussianSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    UniformSphere,
    VmfClusters {
        clusters: usize,
        kappa: f64,
        /// Cluster mean directions; drawn from the seed when empty.
        #[serde(default)]
        means: Vec<[f64; 3]>,
    },
    AnisotropicShell {
        axes: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpacityDistribution {
    Constant(f32),
    UniformRange(f32, f32),
}

impl OpacityDistribution {
    /// Parses `const:<c>` or `uniform:<lo>:<hi>`.
    pub fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["const", c] | ["constant", c] => c.parse().ok().map(OpacityDistribution::Constant),
            ["uniform", lo, hi] => Some(OpacityDistribution::UniformRange(lo.parse().ok()?, hi.parse().ok()?)),
            _ => None,
        }
    }
}

impl Default for OpacityDistribution {
    fn default() -> Self {
        OpacityDistribution::UniformRange(-4.0, 4.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub opacity: OpacityDistribution,
    /// Width of the (all-zero) appearance vector.
    #[serde(default = "default_appearance_width")]
    pub appearance_width: usize,
}

fn default_appearance_width() -> usize {
    3
}

impl SynthSpec {
    pub fn new(kind: SynthKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed, opacity: OpacityDistribution::default(), appearance_width: default_appearance_width() }
    }

    pub fn vmf(clusters: usize, kappa: f64, n: usize, seed: u64) -> Self {
        Self::new(SynthKind::VmfClusters { clusters, kappa, means: Vec::new() }, n, seed)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        match &self.kind {
            SynthKind::UniformSphere => {}
            SynthKind::VmfClusters { clusters, kappa, means } => {
                if *clusters == 0 {
                    return Err(invalid("clusters must be >= 1"));
                }
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return Err(invalid(format!("kappa must be finite and > 0, got {kappa}")));
                }
                if !means.is_empty() && means.len() != *clusters {
                    return Err(invalid(format!("{} means given for {clusters} clusters", means.len())));
                }
                if means.iter().any(|m| m.iter().any(|x| !x.is_finite()) || norm(*m) <= 1e-12) {
                    return Err(invalid("cluster means must be finite and non-zero"));
                }
            }
            SynthKind::AnisotropicShell { axes } => {
                if axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(invalid(format!("axis scales must be finite and > 0, got {axes:?}")));
                }
            }
        }
        match self.opacity {
            OpacityDistribution::Constant(c) if !c.is_finite() => Err(invalid("opacity must be finite")),
            OpacityDistribution::UniformRange(lo, hi) if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(invalid(format!("opacity range [{lo}, {hi}] is invalid")))
            }
            _ => Ok(()),
        }
    }

    /// Reads a spec from a TOML key-value file.
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| invalid(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn uniform_direction<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        if norm(v) > 1e-12 {
            return normalized(v);
        }
    }
}

/// Two unit vectors completing an axis to an orthonormal basis.
type Basis = ([f64; 3], [f64; 3]);

fn tangent_basis(axis: [f64; 3]) -> Basis {
    let helper = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross =
        |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let e1 = normalized(cross(axis, helper));
    let e2 = cross(axis, e1);
    (e1, e2)
}

/// Cosine to the mean direction by CDF inversion: `w = 1 + ln(ξ + (1 − ξ)e^{−2κ}) / κ`.
pub fn vmf_cosine(xi: f64, kappa: f64) -> f64 {
    (1.0 + (xi + (1.0 - xi) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0)
}

fn vmf_direction<R: Rng>(rng: &mut R, mean: [f64; 3], basis: Basis, kappa: f64) -> [f64; 3] {
    // ξ ∈ (0, 1] keeps the logarithm finite.
    let xi = 1.0 - rng.random::<f64>();
    let w = vmf_cosine(xi, kappa);
    let psi = 2.0 * PI * rng.random::<f64>();
    let r = (1.0 - w * w).max(0.0).sqrt();
    let (e1, e2) = basis;
    let (c, s) = (psi.cos(), psi.sin());
    normalized([
        w * mean[0] + r * (c * e1[0] + s * e2[0]),
        w * mean[1] + r * (c * e1[1] + s * e2[1]),
        w * mean[2] + r * (c * e1[2] + s * e2[2]),
    ])
}

fn draw_opacity<R: Rng>(rng: &mut R, dist: OpacityDistribution) -> f32 {
    match dist {
        OpacityDistribution::Constant(c) => c,
        OpacityDistribution::UniformRange(lo, hi) => {
            let t: f64 = rng.random();
            (lo as f64 + (hi as f64 - lo as f64) * t) as f32
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Result<GaussianSet, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let clusters: Vec<([f64; 3], Basis)> = match &spec.kind {
        SynthKind::VmfClusters { clusters, means, .. } => {
            let means: Vec<[f64; 3]> = if means.is_empty() {
                (0..*clusters).map(|_| uniform_direction(&mut rng)).collect()
            } else {
                means.iter().map(|&m| normalized(m)).collect()
            };
            means.into_iter().map(|m| (m, tangent_basis(m))).collect()
        }
        _ => Vec::new(),
    };

    let mut gaussians = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let p = match &spec.kind {
            SynthKind::UniformSphere => uniform_direction(&mut rng),
            SynthKind::VmfClusters { kappa, .. } => {
                let (mean, basis) = clusters[rng.random_range(0..clusters.len())];
                vmf_direction(&mut rng, mean, basis, *kappa)
            }
            SynthKind::AnisotropicShell { axes } => {
                let d = uniform_direction(&mut rng);
                [d[0] * axes[0], d[1] * axes[1], d[2] * axes[2]]
            }
        };
        let opacity = draw_opacity(&mut rng, spec.opacity);
        let position = p.map(|x| x as f32);
        gaussians.push(Gaussian::neutral(position, opacity, spec.appearance_width, i as u64));
    }
    GaussianSet::new(gaussians, spec.appearance_width).map_err(|e| invalid(e.to_string()))
}
