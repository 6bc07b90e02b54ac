use std::collections::HashMap;

use crate::error::{Error, Position, Result};
use crate::geometry::mat;
use crate::scalar::Real;
use crate::types::Calibration;

/// KITTI color camera resolution, used when a calibration file carries no
/// `IMAGE_SIZE` entry.
pub const DEFAULT_IMAGE_WIDTH: u32 = 1242;
pub const DEFAULT_IMAGE_HEIGHT: u32 = 375;

const IMAGE_SIZE_KEY: &str = "IMAGE_SIZE";

fn parse_entries(text: &str) -> Result<HashMap<String, (usize, Vec<f64>)>> {
    let mut entries = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::format(Position::Line(line_no), "expected `KEY: values`"))?;
        let values = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(Position::Line(line_no), format!("invalid number `{tok}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        entries.insert(key.trim().to_string(), (line_no, values));
    }
    Ok(entries)
}

fn take<'a>(entries: &'a HashMap<String, (usize, Vec<f64>)>, key: &str, len: usize) -> Result<&'a [f64]> {
    let (line_no, values) = entries
        .get(key)
        .ok_or_else(|| Error::format(Position::Key(key.into()), "missing calibration entry"))?;
    if values.len() != len {
        return Err(Error::format(
            Position::Line(*line_no),
            format!("`{key}` has {} values, expected {len}", values.len()),
        ));
    }
    Ok(values)
}

/// Parses a KITTI object calibration file.
///
/// The intrinsic is the left 3x3 block of `P2` and its fourth column becomes
/// the image offset; the extrinsic is `R0_rect * Tr_velo_to_cam`. An optional
/// `IMAGE_SIZE: width height` entry sets the image bounds.
pub fn read_calibration<T: Real>(text: &str) -> Result<Calibration<T>> {
    let entries = parse_entries(text)?;
    let p2 = take(&entries, "P2", 12)?;
    let r0 = take(&entries, "R0_rect", 9)?;
    let tr = take(&entries, "Tr_velo_to_cam", 12)?;
    let (width, height) = match entries.get(IMAGE_SIZE_KEY) {
        None => (DEFAULT_IMAGE_WIDTH, DEFAULT_IMAGE_HEIGHT),
        Some(_) => {
            let v = take(&entries, IMAGE_SIZE_KEY, 2)?;
            let line = entries[IMAGE_SIZE_KEY].0;
            let dim = |x: f64| {
                (x >= 1.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX))
                    .then_some(x as u32)
                    .ok_or_else(|| Error::format(Position::Line(line), format!("invalid image dimension {x}")))
            };
            (dim(v[0])?, dim(v[1])?)
        }
    };

    let t = T::lit;
    let intrinsic = [
        [t(p2[0]), t(p2[1]), t(p2[2])],
        [t(p2[4]), t(p2[5]), t(p2[6])],
        [t(p2[8]), t(p2[9]), t(p2[10])],
    ];
    let offset = [t(p2[3]), t(p2[7]), t(p2[11])];
    let mut rect = mat::identity4::<T>();
    for r in 0..3 {
        for c in 0..3 {
            rect[r][c] = t(r0[r * 3 + c]);
        }
    }
    let mut velo = mat::identity4::<T>();
    for r in 0..3 {
        for c in 0..4 {
            velo[r][c] = t(tr[r * 4 + c]);
        }
    }
    let calib = Calibration::new(intrinsic, mat::mul4(&rect, &velo), width, height)?;
    Ok(calib.with_image_offset(offset))
}

/// Writes a calibration in KITTI form with an identity `R0_rect`.
pub fn write_calibration<T: Real>(c: &Calibration<T>) -> String {
    let k = &c.intrinsic;
    let o = &c.image_offset;
    let m = &c.lidar_to_camera;
    let join = |vals: &[T]| vals.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ");
    let (z, one) = (T::zero(), T::one());
    let p2 = [
        k[0][0], k[0][1], k[0][2], o[0], k[1][0], k[1][1], k[1][2], o[1], k[2][0], k[2][1], k[2][2], o[2],
    ];
    let r0 = [one, z, z, z, one, z, z, z, one];
    let tr = [
        m[0][0], m[0][1], m[0][2], m[0][3], m[1][0], m[1][1], m[1][2], m[1][3], m[2][0], m[2][1], m[2][2], m[2][3],
    ];
    format!(
        "P2: {}\nR0_rect: {}\nTr_velo_to_cam: {}\n{IMAGE_SIZE_KEY}: {} {}\n",
        join(&p2),
        join(&r0),
        join(&tr),
        c.image_width,
        c.image_height
    )
}
