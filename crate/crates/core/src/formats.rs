//! On-disk formats: UVGT tensor container, PGM occupancy heatmaps, JSON/CSV reports.
//!
//! UVGT layout (all integers and floats little-endian):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `"UVGT"` |
//! | 4 | 1 | version = 1 |
//! | 5 | 1 | flags = 0 (reserved) |
//! | 6 | 16 | `H, W, K, C` as `u32` |
//! | 22 | 1 | strategy tag (0 spherical, 1 histogram_eq, 2 rank_ot) |
//! | 23 | 8 | `n_input` as `u64` |
//! | 31 | 4·HW | `counts` `u32`, row-major |
//! | … | 4·HW | `raw_counts` `u32` |
//! | … | 4·HWKC | `data` `f32`, `[H][W][K][C]` |
//! | … | 8·HWK | `retained_ids` `u64`, `u64::MAX` when empty |

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mapping::Strategy;
use crate::metrics::UtilizationReport;
use crate::packing::{TensorShape, UvTensor, EMPTY_ID};

pub const MAGIC: [u8; 4] = *b"UVGT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 31;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"UVGT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("size mismatch in {field}: expected {expected} bytes, found {found}")]
    SizeMismatch { field: &'static str, expected: u64, found: u64 },
    #[error("invariant violated in {field}: {detail}")]
    InvariantViolation { field: &'static str, detail: String },
}

fn violation(field: &'static str, detail: impl Into<String>) -> FormatError {
    FormatError::InvariantViolation { field, detail: detail.into() }
}

fn u32_dim(v: usize) -> u32 {
    u32::try_from(v).expect("tensor dimension exceeds u32")
}

pub fn encode_tensor(t: &UvTensor) -> Vec<u8> {
    let s = t.shape;
    let len = HEADER_LEN + 8 * s.slots() + 4 * t.data.len() + 8 * t.retained_ids.len();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(0);
    for d in [s.height, s.width, s.capacity, s.channels] {
        out.extend_from_slice(&u32_dim(d).to_le_bytes());
    }
    out.push(t.strategy.tag());
    out.extend_from_slice(&t.n_input.to_le_bytes());
    for &c in t.counts.iter().chain(&t.raw_counts) {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for &x in &t.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &id in &t.retained_ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn write_tensor(t: &UvTensor, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_tensor(t))?;
    w.flush()?;
    Ok(())
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Parses and fully validates a UVGT byte buffer.
pub fn decode_tensor(bytes: &[u8]) -> Result<UvTensor, FormatError> {
    if bytes.len() < 4 {
        let mut got = [0u8; 4];
        got[..bytes.len()].copy_from_slice(bytes);
        return Err(FormatError::BadMagic(got));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::SizeMismatch {
            field: "header",
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != 0 {
        return Err(violation("flags", format!("reserved flags must be 0, found {:#04x}", bytes[5])));
    }
    let dims = [le_u32(bytes, 6), le_u32(bytes, 10), le_u32(bytes, 14), le_u32(bytes, 18)];
    let names = ["height", "width", "capacity", "channels"];
    for (d, name) in dims.iter().zip(names) {
        if *d == 0 {
            return Err(violation(name, "must be >= 1"));
        }
    }
    let strategy =
        Strategy::from_tag(bytes[22]).ok_or_else(|| violation("strategy", format!("unknown tag {}", bytes[22])))?;
    let n_input = le_u64(bytes, 23);

    let [h, w, k, c] = dims.map(|d| d as u64);
    let slots = h * w; // < 2^64: both factors < 2^32
    let expected = (|| {
        let entries = slots.checked_mul(k)?;
        let data = entries.checked_mul(c)?.checked_mul(4)?;
        let ids = entries.checked_mul(8)?;
        (HEADER_LEN as u64).checked_add(slots.checked_mul(8)?)?.checked_add(data)?.checked_add(ids)
    })();
    let found = bytes.len() as u64;
    match expected {
        Some(e) if e == found => {}
        Some(e) => return Err(FormatError::SizeMismatch { field: "body", expected: e, found }),
        None => return Err(FormatError::SizeMismatch { field: "body", expected: u64::MAX, found }),
    }
    let (slots, k, c) = (slots as usize, k as usize, c as usize);
    let shape = TensorShape { height: h as usize, width: w as usize, capacity: k, channels: c };

    let mut at = HEADER_LEN;
    let mut read_u32s = |n: usize| {
        let v: Vec<u32> = (0..n).map(|i| le_u32(bytes, at + 4 * i)).collect();
        at += 4 * n;
        v
    };
    let counts = read_u32s(slots);
    let raw_counts = read_u32s(slots);
    let data: Vec<f32> =
        bytes[at..at + 4 * slots * k * c].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    at += 4 * slots * k * c;
    let retained_ids: Vec<u64> =
        bytes[at..].chunks_exact(8).map(|b| u64::from_le_bytes(b.try_into().unwrap())).collect();

    let tensor = UvTensor { shape, strategy, n_input, counts, raw_counts, data, retained_ids };
    validate_tensor(&tensor)?;
    Ok(tensor)
}

/// Checks every UV tensor invariant.
pub fn validate_tensor(t: &UvTensor) -> Result<(), FormatError> {
    let s = t.shape;
    let (slots, k, c) = (s.slots(), s.capacity, s.channels);
    if t.counts.len() != slots || t.raw_counts.len() != slots {
        return Err(violation("counts", "length does not match H*W"));
    }
    if t.data.len() != slots * k * c || t.retained_ids.len() != slots * k {
        return Err(violation("data", "length does not match H*W*K*C"));
    }
    let mut raw_total: u64 = 0;
    for (slot, (&n, &raw)) in t.counts.iter().zip(&t.raw_counts).enumerate() {
        if n as usize > k {
            return Err(violation("counts", format!("slot {slot} holds {n} > K = {k}")));
        }
        if n > raw {
            return Err(violation("counts", format!("slot {slot} holds {n} > raw count {raw}")));
        }
        if n as u64 != (raw as u64).min(k as u64) {
            return Err(violation("counts", format!("slot {slot} holds {n}, expected min({raw}, {k})")));
        }
        raw_total += raw as u64;
    }
    if raw_total != t.n_input {
        return Err(violation("raw_counts", format!("sum {raw_total} differs from n_input {}", t.n_input)));
    }
    let mut seen = HashSet::new();
    for slot in 0..slots {
        let n = t.counts[slot] as usize;
        for j in 0..k {
            let e = slot * k + j;
            let id = t.retained_ids[e];
            if j < n {
                if id == EMPTY_ID || id >= t.n_input {
                    return Err(violation("retained_ids", format!("slot {slot} entry {j} has invalid id {id}")));
                }
                if !seen.insert(id) {
                    return Err(violation("retained_ids", format!("id {id} retained twice")));
                }
            } else {
                if id != EMPTY_ID {
                    return Err(violation("retained_ids", format!("slot {slot} entry {j} should be empty")));
                }
                if t.data[e * c..(e + 1) * c].iter().any(|x| x.to_bits() != 0) {
                    return Err(violation("data", format!("slot {slot} entry {j} is empty but not zero-filled")));
                }
            }
        }
    }
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<UvTensor, FormatError> {
    decode_tensor(&fs::read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMode {
    /// Arrivals before truncation.
    Raw,
    /// Retained Gaussians.
    Retained,
}

impl HeatmapMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(HeatmapMode::Raw),
            "retained" => Some(HeatmapMode::Retained),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeatmapMode::Raw => "raw",
            HeatmapMode::Retained => "retained",
        }
    }
}

/// Maps a slot count to a gray level; occupied slots never map to 0.
pub fn heatmap_pixel(count: u32, max_count: u32) -> u8 {
    if count == 0 {
        return 0;
    }
    ((count as u64 * 255 / max_count as u64).clamp(1, 255)) as u8
}

/// Binary PGM (`P5`) of the slot counts, row 0 at the top.
pub fn encode_heatmap(t: &UvTensor, mode: HeatmapMode) -> Vec<u8> {
    let counts = match mode {
        HeatmapMode::Raw => &t.raw_counts,
        HeatmapMode::Retained => &t.counts,
    };
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut out = format!("P5\n{} {}\n255\n", t.shape.width, t.shape.height).into_bytes();
    out.extend(counts.iter().map(|&n| heatmap_pixel(n, max)));
    out
}

pub fn write_heatmap(t: &UvTensor, path: impl AsRef<Path>, mode: HeatmapMode) -> Result<(), FormatError> {
    fs::write(path, encode_heatmap(t, mode))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(ReportFormat::Json),
            "csv" => Some(ReportFormat::Csv),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

pub fn reports_to_json(reports: &[UtilizationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

pub fn reports_from_json(text: &str) -> Result<Vec<UtilizationReport>, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn reports_to_csv(reports: &[UtilizationReport]) -> String {
    let mut out = UtilizationReport::CSV_HEADER.join(",");
    out.push('\n');
    for r in reports {
        let (h, w, k) = r.grid;
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6}\n",
            r.mapping.report_name(),
            h,
            w,
            k,
            r.n_input,
            r.non_empty_ratio,
            r.collision_rate,
            r.retention,
            r.max_slot_arrivals,
            r.row_count_stddev,
            r.col_count_stddev
        ));
    }
    out
}

pub fn render_reports(reports: &[UtilizationReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = reports_to_json(reports);
            s.push('\n');
            s
        }
        ReportFormat::Csv => reports_to_csv(reports),
    }
}

pub fn write_report(
    reports: &[UtilizationReport],
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<(), FormatError> {
    fs::write(path, render_reports(reports, format))?;
    Ok(())
}
