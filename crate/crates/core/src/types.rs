//! Domain types shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::mat;
use crate::scalar::{normalize_angle, Real};

/// Dense class index into a [`ClassCatalog`](crate::catalog::ClassCatalog).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u16);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Semantic label id as stored in segmentation maps.
pub type LabelId = u16;

/// Label id to semantic name.
pub type Legend = BTreeMap<LabelId, String>;

/// A LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T, z: T, intensity: T) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn xyz(x: T, y: T, z: T) -> Self {
        Self::new(x, y, z, T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }

    pub fn cast<U: Real>(&self) -> Point<U> {
        Point {
            x: U::lit(self.x.as_f64()),
            y: U::lit(self.y.as_f64()),
            z: U::lit(self.z.as_f64()),
            intensity: U::lit(self.intensity.as_f64()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud<T = f64> {
    pub points: Vec<Point<T>>,
    pub frame_id: String,
}

impl<T: Real> PointCloud<T> {
    pub fn new(frame_id: impl Into<String>, points: Vec<Point<T>>) -> Self {
        Self {
            points,
            frame_id: frame_id.into(),
        }
    }

    pub fn empty(frame_id: impl Into<String>) -> Self {
        Self::new(frame_id, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// 7-DOF oriented box in the LiDAR frame. `(cx, cy, cz)` is the geometric
/// center, `l` runs along the heading, `yaw` is in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D<T = f64> {
    pub cx: T,
    pub cy: T,
    pub cz: T,
    pub l: T,
    pub w: T,
    pub h: T,
    pub yaw: T,
    pub class_id: ClassId,
}

impl<T: Real> Box3D<T> {
    /// Builds a box, normalizing `yaw` and rejecting non-positive or non-finite dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(cx: T, cy: T, cz: T, l: T, w: T, h: T, yaw: T, class_id: ClassId) -> Result<Self> {
        let b = Self {
            cx,
            cy,
            cz,
            l,
            w,
            h,
            yaw: normalize_angle(yaw),
            class_id,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("box has non-finite fields: {self:?}")));
        }
        if self.l <= T::zero() || self.w <= T::zero() || self.h <= T::zero() {
            return Err(Error::Validation(format!(
                "box dimensions must be positive: l={} w={} h={}",
                self.l, self.w, self.h
            )));
        }
        if self.yaw <= -T::PI() || self.yaw > T::PI() {
            return Err(Error::Validation(format!("box yaw {} outside (-pi, pi]", self.yaw)));
        }
        Ok(())
    }

    pub fn center(&self) -> Point<T> {
        Point::xyz(self.cx, self.cy, self.cz)
    }

    /// Same box moved to a new center and heading.
    pub fn with_pose(&self, cx: T, cy: T, cz: T, yaw: T) -> Self {
        Self {
            cx,
            cy,
            cz,
            yaw: normalize_angle(yaw),
            ..*self
        }
    }

    pub fn cast<U: Real>(&self) -> Box3D<U> {
        Box3D {
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            cz: U::lit(self.cz.as_f64()),
            l: U::lit(self.l.as_f64()),
            w: U::lit(self.w.as_f64()),
            h: U::lit(self.h.as_f64()),
            yaw: U::lit(self.yaw.as_f64()),
            class_id: self.class_id,
        }
    }
}

/// Camera model tying the LiDAR frame to an image.
///
/// Projection is `K * (R * p + t) + image_offset`, followed by the perspective
/// divide. `image_offset` carries the fourth column of a KITTI `P2` matrix and
/// is zero for a plain pinhole camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T = f64> {
    pub intrinsic: [[T; 3]; 3],
    pub lidar_to_camera: [[T; 4]; 4],
    pub image_offset: [T; 3],
    pub image_width: u32,
    pub image_height: u32,
}

impl<T: Real> Calibration<T> {
    pub const ORTHONORMAL_TOL: f64 = 1e-6;

    pub fn new(
        intrinsic: [[T; 3]; 3],
        lidar_to_camera: [[T; 4]; 4],
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let c = Self {
            intrinsic,
            lidar_to_camera,
            image_offset: [T::zero(); 3],
            image_width,
            image_height,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_image_offset(mut self, offset: [T; 3]) -> Self {
        self.image_offset = offset;
        self
    }

    /// Identity extrinsic and intrinsic.
    pub fn identity(image_width: u32, image_height: u32) -> Self {
        Self {
            intrinsic: mat::identity3(),
            lidar_to_camera: mat::identity4(),
            image_offset: [T::zero(); 3],
            image_width,
            image_height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsic;
        if !(k[0][0] > T::zero() && k[1][1] > T::zero()) {
            return Err(Error::Calibration(format!(
                "intrinsic focal entries must be positive (fx={}, fy={})",
                k[0][0], k[1][1]
            )));
        }
        if mat::det3(k).abs() < T::lit(1e-12) {
            return Err(Error::Calibration("intrinsic matrix is singular".into()));
        }
        let r = self.rotation();
        let err = mat::orthonormality_error(&r);
        if err > T::lit(Self::ORTHONORMAL_TOL) {
            return Err(Error::Calibration(format!(
                "extrinsic rotation is not orthonormal (max |R^T R - I| = {err})"
            )));
        }
        if mat::det3(&r) <= T::zero() {
            return Err(Error::Calibration("extrinsic rotation has negative determinant".into()));
        }
        let m = &self.lidar_to_camera;
        let bottom = [m[3][0], m[3][1], m[3][2], m[3][3]];
        if bottom != [T::zero(), T::zero(), T::zero(), T::one()] {
            return Err(Error::Calibration("extrinsic bottom row must be [0 0 0 1]".into()));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Calibration("image dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> [[T; 3]; 3] {
        let m = &self.lidar_to_camera;
        [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ]
    }

    pub fn translation(&self) -> [T; 3] {
        let m = &self.lidar_to_camera;
        [m[0][3], m[1][3], m[2][3]]
    }

    /// LiDAR frame to camera frame.
    pub fn lidar_to_camera_point(&self, p: [T; 3]) -> [T; 3] {
        mat::add3(mat::mul3v(&self.rotation(), p), self.translation())
    }

    /// Camera frame to LiDAR frame (inverse rigid transform).
    pub fn camera_to_lidar_point(&self, p: [T; 3]) -> [T; 3] {
        // Calibration files are only orthonormal to ~1e-6, so R^T is not an exact inverse.
        let r = self.rotation();
        let inv = mat::inverse3(&r).unwrap_or_else(|| mat::transpose3(&r));
        mat::mul3v(&inv, mat::sub3(p, self.translation()))
    }
}

/// Row-major grid of per-pixel semantic label ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticImageMap {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    legend: Legend,
}

impl SemanticImageMap {
    pub fn new(width: u32, height: u32, labels: Vec<u8>, legend: Legend) -> Result<Self> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(Error::Validation(format!(
                "semantic map payload has {} labels, expected {width}x{height}={expected}",
                labels.len()
            )));
        }
        if let Some((i, id)) = labels
            .iter()
            .enumerate()
            .find(|(_, id)| !legend.contains_key(&LabelId::from(**id)))
        {
            return Err(Error::Validation(format!(
                "label id {id} at pixel index {i} has no legend entry"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            legend,
        })
    }

    /// Map where every pixel carries `label`.
    pub fn uniform(width: u32, height: u32, label: u8, legend: Legend) -> Result<Self> {
        Self::new(width, height, vec![label; width as usize * height as usize], legend)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn legend(&self) -> &Legend {
        &self.legend
    }

    pub fn label_at(&self, u: u32, v: u32) -> Option<LabelId> {
        (u < self.width && v < self.height)
            .then(|| LabelId::from(self.labels[v as usize * self.width as usize + u as usize]))
    }

    pub fn name_at(&self, u: u32, v: u32) -> Option<&str> {
        self.label_at(u, v)
            .and_then(|id| self.legend.get(&id))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticPoint<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub label: LabelId,
}

/// Labeled LiDAR points from a point-cloud segmentation, with a spatial index
/// for k-nearest-neighbor lookups.
pub struct SemanticPointMap<T = f64> {
    points: Vec<SemanticPoint<T>>,
    legend: Legend,
    index: kiddo::ImmutableKdTree<f64, 3>,
}

impl<T: Real> SemanticPointMap<T> {
    pub fn new(points: Vec<SemanticPoint<T>>, legend: Legend) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("semantic point map is empty".into()));
        }
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| !legend.contains_key(&p.label)) {
            return Err(Error::Validation(format!(
                "label id {} at point {i} has no legend entry",
                p.label
            )));
        }
        if points
            .iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::Validation(
                "semantic point map has non-finite coordinates".into(),
            ));
        }
        let coords: Vec<[f64; 3]> = points
            .iter()
            .map(|p| [p.x.as_f64(), p.y.as_f64(), p.z.as_f64()])
            .collect();
        let index = kiddo::ImmutableKdTree::new_from_slice(&coords);
        Ok(Self { points, legend, index })
    }

    pub fn points(&self) -> &[SemanticPoint<T>] {
        &self.points
    }

    pub fn legend(&self) -> &Legend {
        &self.legend
    }

    pub(crate) fn index(&self) -> &kiddo::ImmutableKdTree<f64, 3> {
        &self.index
    }
}

impl<T: Real> Clone for SemanticPointMap<T> {
    fn clone(&self) -> Self {
        Self::new(self.points.clone(), self.legend.clone()).expect("already validated")
    }
}

impl<T: Real> fmt::Debug for SemanticPointMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemanticPointMap")
            .field("points", &self.points.len())
            .field("legend", &self.legend)
            .finish()
    }
}
