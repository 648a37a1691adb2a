//! Binary little-endian PLY reader and writer for 3DGS splat files.
//!
//! Header grammar accepted by [`load_ply`]:
//!
//! ```text
//! ply
//! format binary_little_endian 1.0
//! { comment <text> | obj_info <text> }
//! { element <name> <count>
//!   { property <scalar-type> <name> } }
//! end_header
//! ```
//!
//! Scalar types are `char uchar short ushort int uint float double` and
//! their sized aliases (`int8 .. float64`). List properties are rejected.
//! The `vertex` element must carry `x y z opacity scale_0..2 rot_0..3` as
//! `float`. Appearance is assembled as `f_dc_*` (by index), then `f_rest_*`
//! and any other float property in declared order. `nx ny nz` and
//! non-float extras are skipped.
//!
//! [`write_ply`] emits the canonical layout
//! `x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3` plus a
//! `comment uvgs origin_policy <policy>` line, which [`load_ply`] reads back.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::gaussian::{Gaussian, GaussianSet, OriginPolicy};

const ORIGIN_COMMENT: &str = "uvgs origin_policy";
const MAX_HEADER_BYTES: usize = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum PlyError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated body: header promises {expected} bytes, found {found}")]
    TruncatedBody { expected: usize, found: usize },
    #[error("record {index} has a non-finite {field}")]
    NonFiniteRecord { index: usize, field: &'static str },
}

fn malformed(msg: impl Into<String>) -> PlyError {
    PlyError::MalformedHeader(msg.into())
}

/// Counters collected while ingesting a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    /// Non-finite scale, rotation or appearance values replaced by 0.
    pub repaired_values: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    stride: usize,
}

#[derive(Debug)]
struct Header {
    elements: Vec<Element>,
    origin_policy: OriginPolicy,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let search = &bytes[..bytes.len().min(MAX_HEADER_BYTES)];
    let marker = b"end_header";
    let end = search.windows(marker.len()).position(|w| w == marker).ok_or_else(|| malformed("missing end_header"))?;
    let mut body_offset = end + marker.len();
    match bytes.get(body_offset) {
        Some(b'\n') => body_offset += 1,
        Some(b'\r') if bytes.get(body_offset + 1) == Some(&b'\n') => body_offset += 2,
        _ => return Err(malformed("end_header must be followed by a newline")),
    }
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed("header is not valid UTF-8"))?;
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));

    if lines.next() != Some("ply") {
        return Err(malformed("missing 'ply' magic"));
    }
    let mut format_seen = false;
    let mut origin_policy = OriginPolicy::default();
    let mut elements: Vec<Element> = Vec::new();

    for line in lines {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None => continue,
            Some("format") => {
                let fmt = tokens.next();
                let ver = tokens.next();
                if fmt != Some("binary_little_endian") || ver != Some("1.0") {
                    return Err(malformed(format!("unsupported format line '{line}'")));
                }
                format_seen = true;
            }
            Some("comment") => {
                let rest = line.trim_start()["comment".len()..].trim();
                if let Some(policy) = rest.strip_prefix(ORIGIN_COMMENT) {
                    origin_policy = OriginPolicy::parse(policy.trim())
                        .ok_or_else(|| malformed(format!("unknown origin policy '{}'", policy.trim())))?;
                }
            }
            Some("obj_info") => {}
            Some("element") => {
                let name = tokens.next().ok_or_else(|| malformed("element without name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| malformed(format!("bad element count in '{line}'")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new(), stride: 0 });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| malformed("property before any element"))?;
                let ty = tokens.next().ok_or_else(|| malformed("property without type"))?;
                if ty == "list" {
                    return Err(malformed(format!("list properties are not supported ('{line}')")));
                }
                let ty = ScalarType::parse(ty).ok_or_else(|| malformed(format!("unknown property type '{ty}'")))?;
                let name = tokens.next().ok_or_else(|| malformed("property without name"))?;
                if element.properties.iter().any(|p| p.name == name) {
                    return Err(malformed(format!("duplicate property '{name}'")));
                }
                element.properties.push(Property { name: name.to_string(), ty, offset: element.stride });
                element.stride += ty.size();
            }
            Some(other) => return Err(malformed(format!("unexpected header keyword '{other}'"))),
        }
    }
    if !format_seen {
        return Err(malformed("missing format line"));
    }
    Ok(Header { elements, origin_policy, body_offset })
}

#[derive(Debug, Default)]
struct VertexLayout {
    position: [usize; 3],
    opacity: usize,
    scale: [usize; 3],
    rotation: [usize; 4],
    appearance: Vec<usize>,
}

const REQUIRED: [&str; 11] =
    ["x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"];

fn vertex_layout(element: &Element) -> Result<VertexLayout, PlyError> {
    let find = |name: &str| -> Result<usize, PlyError> {
        let p = element
            .properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| malformed(format!("missing required property '{name}'")))?;
        if p.ty != ScalarType::F32 {
            return Err(malformed(format!("property '{name}' must be float")));
        }
        Ok(p.offset)
    };
    let mut layout = VertexLayout {
        position: [find("x")?, find("y")?, find("z")?],
        opacity: find("opacity")?,
        scale: [find("scale_0")?, find("scale_1")?, find("scale_2")?],
        rotation: [find("rot_0")?, find("rot_1")?, find("rot_2")?, find("rot_3")?],
        appearance: Vec::new(),
    };

    let mut dc: Vec<(usize, usize)> = Vec::new();
    let mut rest = Vec::new();
    for p in &element.properties {
        if p.ty != ScalarType::F32 || REQUIRED.contains(&p.name.as_str()) {
            continue;
        }
        if matches!(p.name.as_str(), "nx" | "ny" | "nz") {
            continue;
        }
        match p.name.strip_prefix("f_dc_").and_then(|i| i.parse::<usize>().ok()) {
            Some(i) => dc.push((i, p.offset)),
            None => rest.push(p.offset),
        }
    }
    dc.sort_unstable();
    layout.appearance = dc.into_iter().map(|(_, off)| off).chain(rest).collect();
    Ok(layout)
}

#[inline]
fn f32_at(record: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes([record[offset], record[offset + 1], record[offset + 2], record[offset + 3]])
}

/// Parses an in-memory PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<(GaussianSet, IngestStats), PlyError> {
    let header = parse_header(bytes)?;
    let mut offset = header.body_offset;
    let mut vertex = None;
    for element in &header.elements {
        if element.name == "vertex" {
            vertex = Some((element, offset));
            break;
        }
        let size = element.count.checked_mul(element.stride).ok_or_else(|| malformed("element size overflow"))?;
        offset = offset.checked_add(size).ok_or_else(|| malformed("element size overflow"))?;
    }
    let (element, start) = vertex.ok_or_else(|| malformed("missing vertex element"))?;
    let layout = vertex_layout(element)?;

    let body_len = element.count.checked_mul(element.stride).ok_or_else(|| malformed("vertex size overflow"))?;
    let available = bytes.len().saturating_sub(start);
    if available < body_len {
        return Err(PlyError::TruncatedBody { expected: body_len, found: available });
    }

    let mut stats = IngestStats::default();
    let mut gaussians = Vec::with_capacity(element.count);
    if element.stride > 0 {
        for (index, record) in bytes[start..start + body_len].chunks_exact(element.stride).enumerate() {
            let position = layout.position.map(|o| f32_at(record, o));
            if !position.iter().all(|v| v.is_finite()) {
                return Err(PlyError::NonFiniteRecord { index, field: "position" });
            }
            let opacity = f32_at(record, layout.opacity);
            if !opacity.is_finite() {
                return Err(PlyError::NonFiniteRecord { index, field: "opacity" });
            }
            let mut repair = |v: f32| {
                if v.is_finite() {
                    v
                } else {
                    stats.repaired_values += 1;
                    0.0
                }
            };
            let scale = layout.scale.map(|o| repair(f32_at(record, o)));
            let rotation = layout.rotation.map(|o| repair(f32_at(record, o)));
            let appearance = layout.appearance.iter().map(|&o| repair(f32_at(record, o))).collect();
            gaussians.push(Gaussian { position, scale, rotation, opacity, appearance, source_index: index as u64 });
        }
    }
    if stats.repaired_values > 0 {
        log::warn!("repaired {} non-finite payload values to 0", stats.repaired_values);
    }
    let width = layout.appearance.len();
    let set = GaussianSet::from_reordered(gaussians, width, header.origin_policy);
    Ok((set, stats))
}

/// Reads a binary PLY splat file, returning the set and ingestion counters.
pub fn load_ply_with_stats(path: impl AsRef<Path>) -> Result<(GaussianSet, IngestStats), PlyError> {
    let bytes = fs::read(path)?;
    parse_ply(&bytes)
}

/// Reads a binary PLY splat file.
pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianSet, PlyError> {
    load_ply_with_stats(path).map(|(set, _)| set)
}

/// Property names written for an appearance vector of the given width.
pub fn appearance_property_names(width: usize) -> Vec<String> {
    (0..width).map(|i| if i < 3 { format!("f_dc_{i}") } else { format!("f_rest_{}", i - 3) }).collect()
}

/// Header text emitted by [`write_ply`].
pub fn ply_header(set: &GaussianSet) -> String {
    let mut h = String::new();
    h.push_str("ply\nformat binary_little_endian 1.0\n");
    h.push_str(&format!("comment {ORIGIN_COMMENT} {}\n", set.origin_policy.as_str()));
    h.push_str(&format!("element vertex {}\n", set.len()));
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"].iter().map(|s| s.to_string()).collect();
    names.extend(appearance_property_names(set.appearance_width()));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"].iter().map(|s| s.to_string()),
    );
    for name in names {
        h.push_str(&format!("property float {name}\n"));
    }
    h.push_str("end_header\n");
    h
}

/// Serializes a set into PLY bytes.
pub fn encode_ply(set: &GaussianSet) -> Vec<u8> {
    let header = ply_header(set);
    let stride = 4 * (6 + set.appearance_width() + 8);
    let mut out = Vec::with_capacity(header.len() + stride * set.len());
    out.extend_from_slice(header.as_bytes());
    for g in set.iter() {
        let normals = [0.0f32; 3];
        let fields = g
            .position
            .iter()
            .chain(&normals)
            .chain(&g.appearance)
            .chain(std::iter::once(&g.opacity))
            .chain(&g.scale)
            .chain(&g.rotation);
        for v in fields {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_ply(set: &GaussianSet, path: impl AsRef<Path>) -> Result<(), PlyError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_ply(set))?;
    w.flush()?;
    Ok(())
}
