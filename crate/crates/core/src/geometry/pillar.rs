//! Vertical-column grouping of points with per-point offset features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarSpec<T = f64> {
    pub x_min: T,
    pub y_min: T,
    pub pillar_size: T,
    pub nx: usize,
    pub ny: usize,
}

/// A point with its offsets to the pillar mean (`xc, yc, zc`) and to the
/// pillar center (`xp, yp`). Offsets are signed: `point - reference`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarPoint<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
    pub xc: T,
    pub yc: T,
    pub zc: T,
    pub xp: T,
    pub yp: T,
}

impl<T: Real> PillarPoint<T> {
    pub fn as_array(&self) -> [T; 9] {
        [
            self.x,
            self.y,
            self.z,
            self.intensity,
            self.xc,
            self.yc,
            self.zc,
            self.xp,
            self.yp,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pillar<T = f64> {
    pub ix: usize,
    pub iy: usize,
    pub points: Vec<PillarPoint<T>>,
}

/// Non-empty pillars ordered by `(iy, ix)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarGrid<T = f64> {
    pub spec: PillarSpec<T>,
    pub pillars: Vec<Pillar<T>>,
    /// Points outside the grid extents.
    pub dropped: usize,
}

impl<T: Real> PillarGrid<T> {
    pub fn point_count(&self) -> usize {
        self.pillars.iter().map(|p| p.points.len()).sum()
    }
}

pub fn pillarize<T: Real>(cloud: &PointCloud<T>, spec: PillarSpec<T>) -> Result<PillarGrid<T>> {
    if !(spec.pillar_size > T::zero()) || !spec.pillar_size.is_finite() {
        return Err(Error::Usage(format!(
            "pillar size must be positive, got {}",
            spec.pillar_size
        )));
    }
    let mut buckets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut dropped = 0;
    for (i, p) in cloud.points.iter().enumerate() {
        let fx = ((p.x - spec.x_min) / spec.pillar_size).floor();
        let fy = ((p.y - spec.y_min) / spec.pillar_size).floor();
        let in_range = fx >= T::zero() && fy >= T::zero() && fx < T::lit(spec.nx as f64) && fy < T::lit(spec.ny as f64);
        if !in_range {
            dropped += 1;
            continue;
        }
        let (ix, iy) = (fx.as_f64() as usize, fy.as_f64() as usize);
        buckets.entry((iy, ix)).or_default().push(i);
    }

    let half = T::lit(0.5);
    let pillars = buckets
        .into_iter()
        .map(|((iy, ix), members)| {
            let n = T::lit(members.len() as f64);
            let (sx, sy, sz) = members.iter().fold((T::zero(), T::zero(), T::zero()), |acc, &i| {
                let p = &cloud.points[i];
                (acc.0 + p.x, acc.1 + p.y, acc.2 + p.z)
            });
            let (mx, my, mz) = (sx / n, sy / n, sz / n);
            let center_x = spec.x_min + (T::lit(ix as f64) + half) * spec.pillar_size;
            let center_y = spec.y_min + (T::lit(iy as f64) + half) * spec.pillar_size;
            let points = members
                .iter()
                .map(|&i| {
                    let p = &cloud.points[i];
                    PillarPoint {
                        x: p.x,
                        y: p.y,
                        z: p.z,
                        intensity: p.intensity,
                        xc: p.x - mx,
                        yc: p.y - my,
                        zc: p.z - mz,
                        xp: p.x - center_x,
                        yp: p.y - center_y,
                    }
                })
                .collect();
            Pillar { ix, iy, points }
        })
        .collect();
    Ok(PillarGrid { spec, pillars, dropped })
}
