use log::warn;

use crate::catalog::ClassCatalog;
use crate::error::{Error, Position, Result};
use crate::geometry::{box_camera_to_lidar, box_lidar_to_camera, image_bbox, CameraBox};
use crate::scalar::{normalize_angle, Real};
use crate::types::{Box3D, Calibration, ClassId};

/// Class id given to labeled objects outside the catalog that are kept as
/// collision obstacles (KITTI `Van`, `Truck`, `Misc`, ...).
pub const OBSTACLE_CLASS: ClassId = ClassId(u16::MAX);

const DONT_CARE: &str = "DontCare";

/// What to do with label lines whose type is not in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownClassPolicy {
    #[default]
    Skip,
    Fail,
}

/// One line of a KITTI `label_2` file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelObject<T = f64> {
    pub kind: String,
    pub truncation: T,
    pub occlusion: i32,
    pub alpha: T,
    pub bbox: [T; 4],
    pub camera: CameraBox<T>,
    pub score: Option<T>,
}

pub fn parse_label_line<T: Real>(line: &str, line_no: usize) -> Result<LabelObject<T>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(Error::format(
            Position::Line(line_no),
            format!("expected 15 or 16 fields, found {}", fields.len()),
        ));
    }
    let num = |i: usize| -> Result<T> {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(T::lit)
            .ok_or_else(|| {
                Error::format(
                    Position::Line(line_no),
                    format!("field {} is not a number: `{}`", i + 1, fields[i]),
                )
            })
    };
    let occlusion = fields[2]
        .parse::<i32>()
        .map_err(|_| Error::format(Position::Line(line_no), format!("invalid occlusion `{}`", fields[2])))?;
    Ok(LabelObject {
        kind: fields[0].to_string(),
        truncation: num(1)?,
        occlusion,
        alpha: num(3)?,
        bbox: [num(4)?, num(5)?, num(6)?, num(7)?],
        camera: CameraBox {
            h: num(8)?,
            w: num(9)?,
            l: num(10)?,
            x: num(11)?,
            y: num(12)?,
            z: num(13)?,
            rotation_y: num(14)?,
        },
        score: if fields.len() == 16 { Some(num(15)?) } else { None },
    })
}

/// Boxes from a label file, split by catalog membership.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedLabels<T = f64> {
    /// Catalog classes, in file order.
    pub boxes: Vec<Box3D<T>>,
    /// Non-catalog objects kept for collision checks; class id [`OBSTACLE_CLASS`].
    pub obstacles: Vec<Box3D<T>>,
    /// Names of non-catalog objects, parallel to `obstacles`.
    pub obstacle_kinds: Vec<String>,
}

/// Parses a label file into LiDAR-frame boxes. `DontCare` lines are ignored.
pub fn parse_labels<T: Real>(
    text: &str,
    calib: &Calibration<T>,
    catalog: &ClassCatalog,
    policy: UnknownClassPolicy,
) -> Result<ParsedLabels<T>> {
    let mut out = ParsedLabels {
        boxes: Vec::new(),
        obstacles: Vec::new(),
        obstacle_kinds: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let obj: LabelObject<T> = parse_label_line(line, line_no)?;
        if obj.kind == DONT_CARE {
            continue;
        }
        let bad_box = |e: Error| match e {
            Error::Validation(msg) => Error::format(Position::Line(line_no), msg),
            other => other,
        };
        match catalog.id_of(&obj.kind) {
            Some(id) => out
                .boxes
                .push(box_camera_to_lidar(&obj.camera, id, calib).map_err(bad_box)?),
            None => match policy {
                UnknownClassPolicy::Fail => {
                    return Err(Error::Lookup(format!(
                        "line {line_no}: class `{}` is not in the catalog",
                        obj.kind
                    )))
                }
                UnknownClassPolicy::Skip => {
                    warn!("line {line_no}: skipping label of non-catalog class `{}`", obj.kind);
                    out.obstacles
                        .push(box_camera_to_lidar(&obj.camera, OBSTACLE_CLASS, calib).map_err(bad_box)?);
                    out.obstacle_kinds.push(obj.kind);
                }
            },
        }
    }
    Ok(out)
}

/// Catalog-class boxes of a label file.
pub fn read_labels<T: Real>(
    text: &str,
    calib: &Calibration<T>,
    catalog: &ClassCatalog,
    policy: UnknownClassPolicy,
) -> Result<Vec<Box3D<T>>> {
    parse_labels(text, calib, catalog, policy).map(|p| p.boxes)
}

/// One KITTI label line for a LiDAR-frame box. Truncation and occlusion are
/// written as 0; the 2D box is the clipped projection of the 3D box corners.
pub fn format_label_line<T: Real>(b: &Box3D<T>, name: &str, calib: &Calibration<T>) -> String {
    let cam = box_lidar_to_camera(b, calib);
    let alpha = normalize_angle(cam.rotation_y - cam.x.atan2(cam.z));
    let bbox = image_bbox(b, calib).unwrap_or([T::zero(); 4]);
    let f = |v: T| format!("{v:?}");
    format!(
        "{name} 0.0 0 {} {} {} {} {} {} {} {} {} {} {} {}",
        f(alpha),
        f(bbox[0]),
        f(bbox[1]),
        f(bbox[2]),
        f(bbox[3]),
        f(cam.h),
        f(cam.w),
        f(cam.l),
        f(cam.x),
        f(cam.y),
        f(cam.z),
        f(cam.rotation_y)
    )
}

pub fn write_labels<T: Real>(boxes: &[Box3D<T>], catalog: &ClassCatalog, calib: &Calibration<T>) -> Result<String> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format_label_line(b, catalog.name(b.class_id)?, calib));
        out.push('\n');
    }
    Ok(out)
}
