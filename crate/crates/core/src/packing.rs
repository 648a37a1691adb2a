//! Discretization of continuous UV coordinates and top-K packing into a UV tensor.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::gaussian::{Gaussian, GaussianSet};
use crate::mapping::{ContinuousUv, Strategy};

/// `retained_ids` entry of an empty slot position.
pub const EMPTY_ID: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PackError {
    #[error("channel '{channel}' needs appearance width >= {needed}, set has {available}")]
    ChannelMissing { channel: &'static str, needed: usize, available: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("assignment covers {assignment} gaussians but the set has {set}")]
    Misaligned { assignment: usize, set: usize },
}

/// One attribute group copied into the tensor's channel axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Position,
    Scale,
    Rotation,
    Opacity,
    /// First three appearance coefficients.
    #[serde(rename = "dc")]
    AppearanceDc,
    /// The full appearance vector.
    Appearance,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Position => "position",
            Channel::Scale => "scale",
            Channel::Rotation => "rotation",
            Channel::Opacity => "opacity",
            Channel::AppearanceDc => "dc",
            Channel::Appearance => "appearance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Channel::Position,
            Channel::Scale,
            Channel::Rotation,
            Channel::Opacity,
            Channel::AppearanceDc,
            Channel::Appearance,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    /// Width of this channel group for a set with the given appearance width.
    pub fn width(self, appearance_width: usize) -> usize {
        match self {
            Channel::Position | Channel::Scale => 3,
            Channel::Rotation => 4,
            Channel::Opacity => 1,
            Channel::AppearanceDc => 3,
            Channel::Appearance => appearance_width,
        }
    }

    fn check(self, appearance_width: usize) -> Result<(), PackError> {
        let needed = match self {
            Channel::AppearanceDc => 3,
            Channel::Appearance => 1,
            _ => 0,
        };
        if appearance_width < needed {
            return Err(PackError::ChannelMissing { channel: self.name(), needed, available: appearance_width });
        }
        Ok(())
    }

    fn write(self, g: &Gaussian, out: &mut Vec<f32>) {
        match self {
            Channel::Position => out.extend_from_slice(&g.position),
            Channel::Scale => out.extend_from_slice(&g.scale),
            Channel::Rotation => out.extend_from_slice(&g.rotation),
            Channel::Opacity => out.push(g.opacity),
            Channel::AppearanceDc => out.extend_from_slice(&g.appearance[..3]),
            Channel::Appearance => out.extend_from_slice(&g.appearance),
        }
    }
}

/// Position, scale, rotation, opacity and DC color: 14 channels.
pub const DEFAULT_CHANNELS: [Channel; 5] =
    [Channel::Position, Channel::Scale, Channel::Rotation, Channel::Opacity, Channel::AppearanceDc];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub height: usize,
    pub width: usize,
    pub capacity: usize,
    pub channel_layout: Vec<Channel>,
}

impl GridConfig {
    pub fn new(height: usize, width: usize, capacity: usize) -> Self {
        Self { height, width, capacity, channel_layout: DEFAULT_CHANNELS.to_vec() }
    }

    pub fn with_channels(mut self, channels: Vec<Channel>) -> Self {
        self.channel_layout = channels;
        self
    }

    pub fn slots(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<(), PackError> {
        if self.height == 0 || self.width == 0 || self.capacity == 0 {
            return Err(PackError::InvalidGrid(format!(
                "height, width and K must be >= 1 (got {}x{}, K={})",
                self.height, self.width, self.capacity
            )));
        }
        if self.height > u32::MAX as usize || self.width > u32::MAX as usize || self.capacity > u32::MAX as usize {
            return Err(PackError::InvalidGrid("dimensions must fit in 32 bits".into()));
        }
        if self.channel_layout.is_empty() {
            return Err(PackError::InvalidGrid("channel layout is empty".into()));
        }
        Ok(())
    }

    /// Total channel count `C` for a set with the given appearance width.
    pub fn channel_count(&self, appearance_width: usize) -> usize {
        self.channel_layout.iter().map(|c| c.width(appearance_width)).sum()
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::new(512, 512, 1)
    }
}

/// Integer slot `(row, col)` per Gaussian before truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UvAssignment {
    pub row: Vec<u32>,
    pub col: Vec<u32>,
}

impl UvAssignment {
    pub fn len(&self) -> usize {
        self.row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row.is_empty()
    }
}

/// `min(cells − 1, ⌊x · cells⌋)`.
#[inline]
pub fn cell_index(x: f64, cells: usize) -> u32 {
    // `as` saturates negatives and NaN to 0.
    ((x * cells as f64).floor() as usize).min(cells - 1) as u32
}

pub fn discretize(uv: &ContinuousUv, grid: &GridConfig) -> UvAssignment {
    UvAssignment {
        col: uv.u.iter().map(|&u| cell_index(u, grid.width)).collect(),
        row: uv.v.iter().map(|&v| cell_index(v, grid.height)).collect(),
    }
}

/// Raw arrival count per slot, row-major.
pub fn tally(assignment: &UvAssignment, height: usize, width: usize) -> Vec<u32> {
    let mut raw = vec![0u32; height * width];
    for (&r, &c) in assignment.row.iter().zip(&assignment.col) {
        raw[r as usize * width + c as usize] += 1;
    }
    raw
}

/// Descending opacity, ties by ascending source index.
#[inline]
fn retention_order(a_opacity: f32, a_id: u64, b_opacity: f32, b_id: u64) -> Ordering {
    b_opacity.partial_cmp(&a_opacity).unwrap_or(Ordering::Equal).then(a_id.cmp(&b_id))
}

/// Moves the `k` best items to the front of `items`, sorted, and returns that prefix length.
fn select_top_k<T>(items: &mut [T], k: usize, mut cmp: impl FnMut(&T, &T) -> Ordering) -> usize {
    if items.len() > k {
        items.select_nth_unstable_by(k - 1, &mut cmp);
    }
    let kept = items.len().min(k);
    items[..kept].sort_unstable_by(cmp);
    kept
}

/// The `k` arrivals `(source_index, opacity)` with the largest opacity,
/// sorted by descending opacity with ties broken by ascending source index.
pub fn top_k_retain(arrivals: &[(u64, f32)], k: usize) -> Vec<(u64, f32)> {
    assert!(k >= 1, "K must be >= 1");
    let mut items = arrivals.to_vec();
    let kept = select_top_k(&mut items, k, |a, b| retention_order(a.1, a.0, b.1, b.0));
    items.truncate(kept);
    items
}

/// Shape of a UV tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub height: usize,
    pub width: usize,
    pub capacity: usize,
    pub channels: usize,
}

impl TensorShape {
    pub fn slots(&self) -> usize {
        self.height * self.width
    }
}

/// Packed `H × W × K × C` attribute grid with occupancy side channels.
#[derive(Debug, Clone, PartialEq)]
pub struct UvTensor {
    pub shape: TensorShape,
    pub strategy: Strategy,
    pub n_input: u64,
    /// Retained Gaussians per slot, `min(raw_counts, K)`.
    pub counts: Vec<u32>,
    /// Arrivals per slot before truncation.
    pub raw_counts: Vec<u32>,
    /// Row-major `[H][W][K][C]`, zero where unoccupied.
    pub data: Vec<f32>,
    /// Row-major `[H][W][K]`, [`EMPTY_ID`] where unoccupied.
    pub retained_ids: Vec<u64>,
}

impl UvTensor {
    pub fn retained(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Attributes of entry `k` in slot `(row, col)`.
    pub fn entry(&self, row: usize, col: usize, k: usize) -> &[f32] {
        let s = self.shape;
        let base = ((row * s.width + col) * s.capacity + k) * s.channels;
        &self.data[base..base + s.channels]
    }

    /// The tensor this one would be after packing with a smaller `K`.
    ///
    /// Slots are stored in descending-opacity order, so this is a per-slot prefix.
    pub fn truncated(&self, capacity: usize) -> UvTensor {
        assert!(capacity >= 1 && capacity <= self.shape.capacity, "capacity out of range");
        let old = self.shape;
        let shape = TensorShape { capacity, ..old };
        let c = old.channels;
        let mut data = Vec::with_capacity(shape.slots() * capacity * c);
        let mut retained_ids = Vec::with_capacity(shape.slots() * capacity);
        for s in 0..old.slots() {
            let base = s * old.capacity;
            data.extend_from_slice(&self.data[base * c..(base + capacity) * c]);
            retained_ids.extend_from_slice(&self.retained_ids[base..base + capacity]);
        }
        UvTensor {
            shape,
            strategy: self.strategy,
            n_input: self.n_input,
            counts: self.raw_counts.iter().map(|&r| r.min(capacity as u32)).collect(),
            raw_counts: self.raw_counts.clone(),
            data,
            retained_ids,
        }
    }
}

/// Packs `set` into a UV tensor using the per-Gaussian slots in `assignment`.
pub fn pack(
    set: &GaussianSet,
    assignment: &UvAssignment,
    grid: &GridConfig,
    strategy: Strategy,
) -> Result<UvTensor, PackError> {
    grid.validate()?;
    if assignment.len() != set.len() || assignment.col.len() != set.len() {
        return Err(PackError::Misaligned { assignment: assignment.len(), set: set.len() });
    }
    let width_a = set.appearance_width();
    for ch in &grid.channel_layout {
        ch.check(width_a)?;
    }
    let (h, w, k) = (grid.height, grid.width, grid.capacity);
    let c = grid.channel_count(width_a);
    let slots = h * w;

    if let Some(i) =
        assignment.row.iter().zip(&assignment.col).position(|(&r, &cc)| r as usize >= h || cc as usize >= w)
    {
        return Err(PackError::InvalidGrid(format!("gaussian {i} assigned outside the {h}x{w} grid")));
    }
    let raw_counts = tally(assignment, h, w);

    // Counting sort of Gaussians by slot.
    let mut start = vec![0usize; slots + 1];
    for s in 0..slots {
        start[s + 1] = start[s] + raw_counts[s] as usize;
    }
    let mut fill = start.clone();
    let mut members = vec![0u32; set.len()];
    for (i, (&r, &cc)) in assignment.row.iter().zip(&assignment.col).enumerate() {
        let s = r as usize * w + cc as usize;
        members[fill[s]] = i as u32;
        fill[s] += 1;
    }

    let gaussians = set.gaussians();
    let mut counts = vec![0u32; slots];
    let mut data = vec![0.0f32; slots * k * c];
    let mut retained_ids = vec![EMPTY_ID; slots * k];
    let mut scratch = Vec::with_capacity(c);
    for s in 0..slots {
        let bucket = &mut members[start[s]..start[s + 1]];
        if bucket.is_empty() {
            continue;
        }
        let kept = select_top_k(bucket, k, |&a, &b| {
            let (ga, gb) = (&gaussians[a as usize], &gaussians[b as usize]);
            retention_order(ga.opacity, ga.source_index, gb.opacity, gb.source_index)
        });
        counts[s] = kept as u32;
        for (j, &i) in bucket[..kept].iter().enumerate() {
            let g = &gaussians[i as usize];
            let entry = s * k + j;
            retained_ids[entry] = g.source_index;
            scratch.clear();
            for ch in &grid.channel_layout {
                ch.write(g, &mut scratch);
            }
            data[entry * c..(entry + 1) * c].copy_from_slice(&scratch);
        }
    }

    Ok(UvTensor {
        shape: TensorShape { height: h, width: w, capacity: k, channels: c },
        strategy,
        n_input: set.len() as u64,
        counts,
        raw_counts,
        data,
        retained_ids,
    })
}
