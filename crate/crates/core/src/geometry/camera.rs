//! Pinhole projection and KITTI camera-frame box conversion.

use serde::{Deserialize, Serialize};

use super::mat;
use super::obb::from_box_frame;
use crate::error::{Error, Result};
use crate::scalar::{normalize_angle, Real};
use crate::types::{Box3D, Calibration, ClassId, Point};

/// Camera depth at or below which a point is treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel<T = f64> {
    pub u: T,
    pub v: T,
    /// Camera-frame z in meters.
    pub depth: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<T = f64> {
    Visible(Pixel<T>),
    BehindCamera,
    /// In front of the camera but outside `[0, width) x [0, height)`.
    OutOfImage(Pixel<T>),
}

impl<T: Real> Projection<T> {
    pub fn visible(&self) -> Option<Pixel<T>> {
        match self {
            Projection::Visible(px) => Some(*px),
            _ => None,
        }
    }
}

pub fn project_to_image<T: Real>(p: &Point<T>, c: &Calibration<T>) -> Projection<T> {
    let cam = c.lidar_to_camera_point([p.x, p.y, p.z]);
    if cam[2] <= T::lit(MIN_DEPTH) {
        return Projection::BehindCamera;
    }
    let hom = mat::add3(mat::mul3v(&c.intrinsic, cam), c.image_offset);
    if hom[2] <= T::zero() {
        return Projection::BehindCamera;
    }
    let px = Pixel {
        u: hom[0] / hom[2],
        v: hom[1] / hom[2],
        depth: cam[2],
    };
    let inside = px.u >= T::zero()
        && px.v >= T::zero()
        && px.u < T::lit(f64::from(c.image_width))
        && px.v < T::lit(f64::from(c.image_height));
    if inside {
        Projection::Visible(px)
    } else {
        Projection::OutOfImage(px)
    }
}

/// Lifts a pixel back to the LiDAR frame along its viewing ray, at the stored depth.
pub fn back_project<T: Real>(px: &Pixel<T>, c: &Calibration<T>) -> Result<Point<T>> {
    let k_inv = mat::inverse3(&c.intrinsic).ok_or_else(|| Error::Calibration("singular intrinsic".into()))?;
    let ray = mat::mul3v(&k_inv, [px.u, px.v, T::one()]);
    let off = mat::mul3v(&k_inv, c.image_offset);
    if ray[2].abs() <= T::min_positive_value() {
        return Err(Error::Calibration("pixel ray parallel to image plane".into()));
    }
    let scale = (px.depth + off[2]) / ray[2];
    let cam = mat::sub3([ray[0] * scale, ray[1] * scale, ray[2] * scale], off);
    let l = c.camera_to_lidar_point(cam);
    Ok(Point::xyz(l[0], l[1], l[2]))
}

/// KITTI label geometry: bottom-center location in the rectified camera frame,
/// `rotation_y` about the camera y axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraBox<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub h: T,
    pub w: T,
    pub l: T,
    pub rotation_y: T,
}

/// Converts a camera-frame label box into a LiDAR-frame [`Box3D`].
///
/// The bottom center is mapped through the inverse extrinsic and then raised
/// by `h / 2` along LiDAR z; yaw follows the KITTI convention
/// `yaw = -rotation_y - pi/2`.
pub fn box_camera_to_lidar<T: Real>(cam: &CameraBox<T>, class_id: ClassId, c: &Calibration<T>) -> Result<Box3D<T>> {
    c.validate()?;
    let bottom = c.camera_to_lidar_point([cam.x, cam.y, cam.z]);
    let half = T::lit(0.5);
    Box3D::new(
        bottom[0],
        bottom[1],
        bottom[2] + cam.h * half,
        cam.l,
        cam.w,
        cam.h,
        -cam.rotation_y - T::FRAC_PI_2(),
        class_id,
    )
}

/// Inverse of [`box_camera_to_lidar`].
pub fn box_lidar_to_camera<T: Real>(b: &Box3D<T>, c: &Calibration<T>) -> CameraBox<T> {
    let bottom = c.lidar_to_camera_point([b.cx, b.cy, b.cz - b.h * T::lit(0.5)]);
    CameraBox {
        x: bottom[0],
        y: bottom[1],
        z: bottom[2],
        h: b.h,
        w: b.w,
        l: b.l,
        rotation_y: normalize_angle(-b.yaw - T::FRAC_PI_2()),
    }
}

/// Image-space bounds `[u_min, v_min, u_max, v_max]` of a box's eight corners,
/// clipped to the image. `None` when any corner is behind the camera or the
/// clipped bounds are empty.
pub fn image_bbox<T: Real>(b: &Box3D<T>, c: &Calibration<T>) -> Option<[T; 4]> {
    let half = T::lit(0.5);
    let (hl, hw, hh) = (b.l * half, b.w * half, b.h * half);
    let mut bounds = [T::infinity(), T::infinity(), T::neg_infinity(), T::neg_infinity()];
    for sx in [-T::one(), T::one()] {
        for sy in [-T::one(), T::one()] {
            for sz in [-T::one(), T::one()] {
                let w = from_box_frame([sx * hl, sy * hw, sz * hh], b);
                let px = match project_to_image(&Point::xyz(w[0], w[1], w[2]), c) {
                    Projection::BehindCamera => return None,
                    Projection::Visible(px) | Projection::OutOfImage(px) => px,
                };
                bounds = [
                    bounds[0].min(px.u),
                    bounds[1].min(px.v),
                    bounds[2].max(px.u),
                    bounds[3].max(px.v),
                ];
            }
        }
    }
    let (wmax, hmax) = (
        T::lit(f64::from(c.image_width) - 1.0),
        T::lit(f64::from(c.image_height) - 1.0),
    );
    let clipped = [
        bounds[0].max(T::zero()),
        bounds[1].max(T::zero()),
        bounds[2].min(wmax),
        bounds[3].min(hmax),
    ];
    (clipped[0] < clipped[2] && clipped[1] < clipped[3]).then_some(clipped)
}
