use crate::scalar::Real;
use crate::types::{Box3D, Point, PointCloud};

/// Expresses `p` in the box frame: translate by the negated center, then
/// rotate by the negated yaw about z.
#[inline]
pub fn to_box_frame<T: Real>(p: &Point<T>, b: &Box3D<T>) -> [T; 3] {
    let (s, c) = b.yaw.sin_cos();
    let dx = p.x - b.cx;
    let dy = p.y - b.cy;
    [c * dx + s * dy, -s * dx + c * dy, p.z - b.cz]
}

/// Inverse of [`to_box_frame`].
#[inline]
pub fn from_box_frame<T: Real>(local: [T; 3], b: &Box3D<T>) -> [T; 3] {
    let (s, c) = b.yaw.sin_cos();
    [
        c * local[0] - s * local[1] + b.cx,
        s * local[0] + c * local[1] + b.cy,
        local[2] + b.cz,
    ]
}

/// Closed containment test: points on a face count as inside.
#[inline]
pub fn point_in_obb<T: Real>(p: &Point<T>, b: &Box3D<T>) -> bool {
    point_in_obb_with_margin(p, b, T::zero())
}

/// Containment with each half-extent grown by `margin`.
#[inline]
pub fn point_in_obb_with_margin<T: Real>(p: &Point<T>, b: &Box3D<T>, margin: T) -> bool {
    let half = T::lit(0.5);
    let [x, y, z] = to_box_frame(p, b);
    x.abs() <= b.l * half + margin && y.abs() <= b.w * half + margin && z.abs() <= b.h * half + margin
}

/// The points of `cloud` inside `b`, in their original order.
pub fn extract_points_in_box<T: Real>(cloud: &PointCloud<T>, b: &Box3D<T>) -> PointCloud<T> {
    PointCloud {
        points: cloud.points.iter().filter(|p| point_in_obb(p, b)).copied().collect(),
        frame_id: cloud.frame_id.clone(),
    }
}

/// Box center dropped to `z = 0`; used only to look up the region under an object.
pub fn ground_anchor<T: Real>(b: &Box3D<T>) -> Point<T> {
    Point::xyz(b.cx, b.cy, T::zero())
}

/// Footprint corners in counter-clockwise order.
pub fn bev_corners<T: Real>(b: &Box3D<T>) -> [[T; 2]; 4] {
    let half = T::lit(0.5);
    let (hl, hw) = (b.l * half, b.w * half);
    let (s, c) = b.yaw.sin_cos();
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(x, y)| [c * x - s * y + b.cx, s * x + c * y + b.cy])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClassId;
    use std::f64::consts::FRAC_PI_2;

    fn bx(cx: f64, cy: f64, cz: f64, l: f64, w: f64, h: f64, yaw: f64) -> Box3D {
        Box3D::new(cx, cy, cz, l, w, h, yaw, ClassId(0)).unwrap()
    }

    #[test]
    fn center_is_inside() {
        assert!(point_in_obb(
            &Point::xyz(0.0, 0.0, 0.0),
            &bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0)
        ));
    }

    #[test]
    fn rotated_box_contains_rotated_point() {
        let b = bx(0.0, 0.0, 0.0, 4.0, 2.0, 2.0, FRAC_PI_2);
        assert!(point_in_obb(&Point::xyz(0.9, 1.9, 0.0), &b));
        let local = to_box_frame(&Point::xyz(0.9, 1.9, 0.0), &b);
        assert!((local[0] - 1.9).abs() < 1e-12 && (local[1] + 0.9).abs() < 1e-12);
        // Would be inside if the box were not rotated.
        assert!(!point_in_obb(&Point::xyz(1.9, 0.9, 0.0), &b));
    }

    #[test]
    fn outside_along_x() {
        assert!(!point_in_obb(
            &Point::xyz(3.0, 0.0, 0.0),
            &bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0)
        ));
    }

    #[test]
    fn faces_are_inside() {
        let b = bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        assert!(point_in_obb(&Point::xyz(1.0, -1.0, 1.0), &b));
        assert!(!point_in_obb(&Point::xyz(1.0 + 1e-9, 0.0, 0.0), &b));
    }

    #[test]
    fn extraction_keeps_order_and_handles_empty() {
        let b = bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        let cloud = PointCloud::new(
            "f",
            vec![
                Point::xyz(0.5, 0.0, 0.0),
                Point::xyz(-0.5, 0.2, 0.1),
                Point::xyz(0.0, 0.9, -0.9),
            ],
        );
        assert_eq!(extract_points_in_box(&cloud, &b), cloud);
        assert!(extract_points_in_box(&PointCloud::<f64>::empty("e"), &b).is_empty());
    }

    #[test]
    fn ground_anchor_zeroes_height() {
        let a = ground_anchor(&bx(5.0, -2.0, 1.7, 1.0, 1.0, 1.0, 0.0));
        assert_eq!((a.x, a.y, a.z), (5.0, -2.0, 0.0));
        let a = ground_anchor(&bx(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0));
        assert_eq!((a.x, a.y, a.z), (0.0, 0.0, 0.0));
        let a = ground_anchor(&bx(-3.5, 8.0, -0.4, 1.0, 1.0, 1.0, 0.0));
        assert_eq!((a.x, a.y, a.z), (-3.5, 8.0, 0.0));
    }

    #[test]
    fn box_frame_round_trip() {
        let b = bx(3.0, -1.0, 0.5, 4.0, 2.0, 1.5, 0.7);
        let p = Point::xyz(2.2, 0.4, 1.1);
        let back = from_box_frame(to_box_frame(&p, &b), &b);
        assert!((back[0] - p.x).abs() < 1e-12 && (back[1] - p.y).abs() < 1e-12 && (back[2] - p.z).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let b = Box3D::<f32>::new(0.0, 0.0, 0.0, 4.0, 2.0, 2.0, std::f32::consts::FRAC_PI_2, ClassId(0)).unwrap();
        assert!(point_in_obb(&Point::xyz(0.9f32, 1.9, 0.0), &b));
    }
}
