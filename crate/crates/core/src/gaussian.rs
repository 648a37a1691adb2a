//! Gaussian splat domain types.

use serde::{Deserialize, Serialize};

/// One 3D Gaussian as stored in a splat file.
///
/// Values are kept exactly as stored: `scale` is log-scale, `rotation` is an
/// unnormalized quaternion and `opacity` is the pre-sigmoid logit. Since the
/// sigmoid is strictly monotone, ranking by the logit equals ranking by the
/// activated opacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub position: [f32; 3],
    pub scale: [f32; 3],
    pub rotation: [f32; 4],
    pub opacity: f32,
    /// Spherical-harmonic coefficients, DC terms first.
    pub appearance: Vec<f32>,
    /// 0-based position of the record in its source.
    pub source_index: u64,
}

impl Gaussian {
    /// A Gaussian with neutral payload: log-scale 0, identity rotation, zero appearance.
    pub fn neutral(position: [f32; 3], opacity: f32, appearance_width: usize, source_index: u64) -> Self {
        Self {
            position,
            scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity,
            appearance: vec![0.0; appearance_width],
            source_index,
        }
    }
}

/// Which point is used as the center when computing directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginPolicy {
    /// Directions are taken from the coordinate origin.
    RawOrigin,
    /// Directions are taken from the arithmetic mean of all positions.
    #[default]
    Centroid,
}

impl OriginPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            OriginPolicy::RawOrigin => "origin",
            OriginPolicy::Centroid => "centroid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "origin" | "raw" | "raw_origin" => Some(OriginPolicy::RawOrigin),
            "centroid" => Some(OriginPolicy::Centroid),
            _ => None,
        }
    }
}

/// Error returned when a set of Gaussians does not satisfy the set invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetError {
    #[error("gaussian {index} has appearance width {found}, expected {expected}")]
    AppearanceWidth { index: usize, expected: usize, found: usize },
    #[error("gaussian {index} has source_index {found}, expected {index}")]
    SourceIndex { index: usize, found: u64 },
    #[error("gaussian {index} has a non-finite {field}")]
    NonFinite { index: usize, field: &'static str },
}

/// An ordered collection of Gaussians sharing one appearance width.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSet {
    gaussians: Vec<Gaussian>,
    appearance_width: usize,
    pub origin_policy: OriginPolicy,
}

impl GaussianSet {
    pub fn empty(appearance_width: usize) -> Self {
        Self { gaussians: Vec::new(), appearance_width, origin_policy: OriginPolicy::default() }
    }

    /// Builds a set, checking the shared appearance width, the `source_index`
    /// numbering and finiteness of the geometric fields.
    pub fn new(gaussians: Vec<Gaussian>, appearance_width: usize) -> Result<Self, SetError> {
        for (i, g) in gaussians.iter().enumerate() {
            if g.appearance.len() != appearance_width {
                return Err(SetError::AppearanceWidth {
                    index: i,
                    expected: appearance_width,
                    found: g.appearance.len(),
                });
            }
            if g.source_index != i as u64 {
                return Err(SetError::SourceIndex { index: i, found: g.source_index });
            }
            let checks: [(&'static str, bool); 4] = [
                ("position", g.position.iter().all(|v| v.is_finite())),
                ("scale", g.scale.iter().all(|v| v.is_finite())),
                ("rotation", g.rotation.iter().all(|v| v.is_finite())),
                ("opacity", g.opacity.is_finite()),
            ];
            if let Some((field, _)) = checks.iter().find(|(_, ok)| !ok) {
                return Err(SetError::NonFinite { index: i, field });
            }
        }
        Ok(Self { gaussians, appearance_width, origin_policy: OriginPolicy::default() })
    }

    /// Builds a set without renumbering checks. `source_index` values must
    /// still be unique; used for reordered views of an existing set.
    pub fn from_reordered(gaussians: Vec<Gaussian>, appearance_width: usize, origin_policy: OriginPolicy) -> Self {
        debug_assert!(gaussians.iter().all(|g| g.appearance.len() == appearance_width));
        Self { gaussians, appearance_width, origin_policy }
    }

    pub fn with_origin_policy(mut self, policy: OriginPolicy) -> Self {
        self.origin_policy = policy;
        self
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    pub fn into_gaussians(self) -> Vec<Gaussian> {
        self.gaussians
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn appearance_width(&self) -> usize {
        self.appearance_width
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Gaussian> {
        self.gaussians.iter()
    }
}
