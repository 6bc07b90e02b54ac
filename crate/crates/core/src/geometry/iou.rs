//! Bird's-eye-view IoU of yaw-rotated boxes by convex polygon clipping.

use std::cmp::Ordering;

use super::obb::bev_corners;
use crate::scalar::Real;
use crate::types::Box3D;

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area<T: Real>(poly: &[[T; 2]]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let twice = (0..poly.len()).fold(T::zero(), |acc, i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc + (a[0] * b[1] - b[0] * a[1])
    });
    twice * T::lit(0.5)
}

#[inline]
fn cross<T: Real>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Intersection of segment `p -> q` with the infinite line through `a -> b`,
/// given the signed side values of `p` and `q`.
#[inline]
fn segment_line_hit<T: Real>(p: [T; 2], q: [T; 2], side_p: T, side_q: T) -> [T; 2] {
    let t = side_p / (side_p - side_q);
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
fn clip_convex<T: Real>(subject: &[[T; 2]], clip: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut output: Vec<[T; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let side_cur = cross(a, b, cur);
            let side_prev = cross(a, b, prev);
            let cur_in = side_cur >= T::zero();
            let prev_in = side_prev >= T::zero();
            if cur_in {
                if !prev_in {
                    output.push(segment_line_hit(prev, cur, side_prev, side_cur));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_hit(prev, cur, side_prev, side_cur));
            }
        }
    }
    output
}

fn footprint_key<T: Real>(b: &Box3D<T>) -> [T; 5] {
    [b.cx, b.cy, b.l, b.w, b.yaw]
}

fn cmp_keys<T: Real>(a: &[T; 5], b: &[T; 5]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Area of intersection over area of union of the two footprints, in `[0, 1]`.
///
/// Symmetric bit-for-bit: the pair is put in a canonical order before clipping.
pub fn bev_iou<T: Real>(a: &Box3D<T>, b: &Box3D<T>) -> T {
    let (ka, kb) = (footprint_key(a), footprint_key(b));
    let (a, b) = match cmp_keys(&ka, &kb) {
        Ordering::Equal => return T::one(),
        Ordering::Greater => (b, a),
        Ordering::Less => (a, b),
    };
    let half = T::lit(0.5);
    // Circumscribed circles do not touch: no overlap.
    let ra = (a.l * a.l + a.w * a.w).sqrt() * half;
    let rb = (b.l * b.l + b.w * b.w).sqrt() * half;
    let (dx, dy) = (a.cx - b.cx, a.cy - b.cy);
    if (dx * dx + dy * dy).sqrt() > ra + rb {
        return T::zero();
    }
    let inter = polygon_area(&clip_convex(&bev_corners(a), &bev_corners(b)));
    if !(inter > T::zero()) {
        return T::zero();
    }
    let union = a.l * a.w + b.l * b.w - inter;
    if !(union > T::zero()) {
        return T::zero();
    }
    (inter / union).max(T::zero()).min(T::one())
}
