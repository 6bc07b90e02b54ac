//! Semantic segmentation containers.
//!
//! Image maps: 8-byte magic, `u32` LE width, `u32` LE height, then
//! `width * height` row-major `u8` label ids. The legend is a sidecar text
//! file with one `<id> <name>` entry per line; names may contain spaces.
//!
//! Point maps pair a velodyne scan with a per-point `u32` LE label file whose
//! low 16 bits are the label id.

use crate::error::{Error, Position, Result};
use crate::scalar::Real;
use crate::types::{LabelId, Legend, SemanticImageMap, SemanticPoint, SemanticPointMap};

use super::velodyne::read_point_cloud;

pub const SEMANTIC_MAGIC: [u8; 8] = *b"LRSEMAP1";
const HEADER_BYTES: usize = 16;

pub fn parse_legend(text: &str) -> Result<Legend> {
    let mut legend = Legend::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, name) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::format(Position::Line(line_no), "expected `<id> <name>`"))?;
        let id: LabelId = id
            .parse()
            .map_err(|_| Error::format(Position::Line(line_no), format!("invalid label id `{id}`")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::format(Position::Line(line_no), "empty label name"));
        }
        if legend.insert(id, name.to_string()).is_some() {
            return Err(Error::format(
                Position::Line(line_no),
                format!("duplicate label id {id}"),
            ));
        }
    }
    Ok(legend)
}

pub fn write_legend(legend: &Legend) -> String {
    legend.iter().map(|(id, name)| format!("{id} {name}\n")).collect()
}

pub fn read_semantic_map(bytes: &[u8], legend_text: &str) -> Result<SemanticImageMap> {
    let legend = parse_legend(legend_text)?;
    if bytes.len() < HEADER_BYTES {
        return Err(Error::format(
            Position::Byte(bytes.len() as u64),
            format!("semantic map header needs {HEADER_BYTES} bytes"),
        ));
    }
    if bytes[..8] != SEMANTIC_MAGIC {
        return Err(Error::format(Position::Byte(0), "bad semantic map magic"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes"));
    let expected = width as u64 * height as u64;
    let payload = &bytes[HEADER_BYTES..];
    if payload.len() as u64 != expected {
        return Err(Error::format(
            Position::Byte(HEADER_BYTES as u64),
            format!(
                "declared {width}x{height} needs {expected} label bytes, found {}",
                payload.len()
            ),
        ));
    }
    if let Some(i) = payload.iter().position(|id| !legend.contains_key(&LabelId::from(*id))) {
        return Err(Error::format(
            Position::Byte((HEADER_BYTES + i) as u64),
            format!("label id {} has no legend entry", payload[i]),
        ));
    }
    SemanticImageMap::new(width, height, payload.to_vec(), legend)
}

/// Container bytes and legend text.
pub fn write_semantic_map(map: &SemanticImageMap) -> (Vec<u8>, String) {
    let mut bytes = Vec::with_capacity(HEADER_BYTES + map.labels().len());
    bytes.extend_from_slice(&SEMANTIC_MAGIC);
    bytes.extend_from_slice(&map.width().to_le_bytes());
    bytes.extend_from_slice(&map.height().to_le_bytes());
    bytes.extend_from_slice(map.labels());
    (bytes, write_legend(map.legend()))
}

pub fn read_semantic_points<T: Real>(
    cloud_bytes: &[u8],
    label_bytes: &[u8],
    legend_text: &str,
) -> Result<SemanticPointMap<T>> {
    let legend = parse_legend(legend_text)?;
    let cloud = read_point_cloud::<T>(cloud_bytes, "")?;
    if label_bytes.len() != cloud.len() * 4 {
        return Err(Error::format(
            Position::Byte(label_bytes.len() as u64 / 4 * 4),
            format!(
                "{} label bytes for {} points (expected 4 per point)",
                label_bytes.len(),
                cloud.len()
            ),
        ));
    }
    let mut points = Vec::with_capacity(cloud.len());
    for (i, (p, raw)) in cloud.points.iter().zip(label_bytes.chunks_exact(4)).enumerate() {
        let label = (u32::from_le_bytes(raw.try_into().expect("4 bytes")) & 0xFFFF) as LabelId;
        if !legend.contains_key(&label) {
            return Err(Error::format(
                Position::Byte((i * 4) as u64),
                format!("label id {label} has no legend entry"),
            ));
        }
        points.push(SemanticPoint {
            x: p.x,
            y: p.y,
            z: p.z,
            label,
        });
    }
    SemanticPointMap::new(points, legend)
}
