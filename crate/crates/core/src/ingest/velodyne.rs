use crate::error::{Error, Position, Result};
use crate::scalar::Real;
use crate::types::{Point, PointCloud};

/// `x, y, z, intensity` as little-endian `f32`.
pub const POINT_RECORD_BYTES: usize = 16;

/// Parses a KITTI velodyne scan.
pub fn read_point_cloud<T: Real>(bytes: &[u8], frame_id: &str) -> Result<PointCloud<T>> {
    let whole = bytes.len() / POINT_RECORD_BYTES * POINT_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(Error::format(
            Position::Byte(whole as u64),
            format!(
                "truncated point record: {} trailing bytes (records are {POINT_RECORD_BYTES} bytes)",
                bytes.len() - whole
            ),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / POINT_RECORD_BYTES);
    for (r, record) in bytes.chunks_exact(POINT_RECORD_BYTES).enumerate() {
        let mut v = [0f32; 4];
        for (i, chunk) in record.chunks_exact(4).enumerate() {
            v[i] = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            if !v[i].is_finite() {
                return Err(Error::format(
                    Position::Byte((r * POINT_RECORD_BYTES + i * 4) as u64),
                    format!("non-finite value {}", v[i]),
                ));
            }
        }
        points.push(Point::new(
            T::lit(f64::from(v[0])),
            T::lit(f64::from(v[1])),
            T::lit(f64::from(v[2])),
            T::lit(f64::from(v[3])),
        ));
    }
    Ok(PointCloud::new(frame_id, points))
}

/// Serializes a cloud as a KITTI velodyne scan. Coordinates are rounded to `f32`.
pub fn write_point_cloud<T: Real>(cloud: &PointCloud<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_RECORD_BYTES);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}
