//! Semantic lookups under a ground anchor and the BEV placement grid built from them.

use std::collections::BTreeMap;
use std::num::NonZero;

use kiddo::SquaredEuclidean;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::camera::{project_to_image, Projection};
use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{Calibration, ClassId, LabelId, Point, SemanticImageMap, SemanticPointMap};

/// Where semantic context comes from for one frame.
#[derive(Debug, Clone, Copy)]
pub enum SemanticSource<'a, T: Real = f64> {
    Image {
        map: &'a SemanticImageMap,
        calib: &'a Calibration<T>,
    },
    Points(&'a SemanticPointMap<T>),
}

/// Result of looking up the semantic region under an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelLookup<'a> {
    Label(&'a str),
    BehindCamera,
    OffMap,
}

/// Majority label of the `k` nearest semantic points. Ties go to the tied
/// label owning the single nearest neighbor.
pub fn knn_label<T: Real>(map: &SemanticPointMap<T>, anchor: &Point<T>, k: usize) -> LabelId {
    let k = NonZero::new(k.max(1)).expect("k >= 1");
    let query = [anchor.x.as_f64(), anchor.y.as_f64(), anchor.z.as_f64()];
    let mut hits = map.index().nearest_n::<SquaredEuclidean>(&query, k);
    hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.item.cmp(&b.item)));
    let points = map.points();
    let mut votes: BTreeMap<LabelId, usize> = BTreeMap::new();
    for h in &hits {
        *votes.entry(points[h.item as usize].label).or_default() += 1;
    }
    let best = votes.values().copied().max().unwrap_or(0);
    hits.iter()
        .map(|h| points[h.item as usize].label)
        .find(|label| votes[label] == best)
        .expect("at least one neighbor")
}

/// Semantic name under `anchor`. The image path projects the anchor; the point
/// path runs a k-nearest-neighbor vote.
pub fn semantic_lookup<'a, T: Real>(source: &SemanticSource<'a, T>, anchor: &Point<T>, k: usize) -> LabelLookup<'a> {
    match *source {
        SemanticSource::Image { map, calib } => match project_to_image(anchor, calib) {
            Projection::BehindCamera => LabelLookup::BehindCamera,
            Projection::OutOfImage(_) => LabelLookup::OffMap,
            Projection::Visible(px) => {
                let (u, v) = (px.u.floor().as_f64(), px.v.floor().as_f64());
                match map.name_at(u as u32, v as u32) {
                    Some(name) => LabelLookup::Label(name),
                    None => LabelLookup::OffMap,
                }
            }
        },
        SemanticSource::Points(map) => {
            let id = knn_label(map, anchor, k);
            LabelLookup::Label(map.legend()[&id].as_str())
        }
    }
}

/// Extent and resolution of a BEV grid. Cells are row-major with x varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T = f64> {
    pub x_min: T,
    pub y_min: T,
    pub cell_size: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > T::zero()) || !self.cell_size.is_finite() {
            return Err(Error::Usage(format!(
                "grid cell size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Usage("grid extents must be positive".into()));
        }
        if !(self.x_min.is_finite() && self.y_min.is_finite()) {
            return Err(Error::Usage("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_center(&self, index: usize) -> (T, T) {
        let (ix, iy) = (index % self.nx, index / self.nx);
        let half = T::lit(0.5);
        (
            self.x_min + (T::lit(ix as f64) + half) * self.cell_size,
            self.y_min + (T::lit(iy as f64) + half) * self.cell_size,
        )
    }
}

/// Placement probability over BEV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid<T = f64> {
    pub spec: GridSpec<T>,
    pub prob: Vec<T>,
}

impl<T: Real> OccupancyGrid<T> {
    pub fn admissible_count(&self) -> usize {
        self.prob.iter().filter(|p| **p > T::zero()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.admissible_count() == 0
    }

    /// Draws a cell index with probability `prob[i]`; `None` for an all-zero grid.
    pub fn sample_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let weights: Vec<f64> = self.prob.iter().map(|p| p.as_f64()).collect();
        WeightedIndex::new(&weights).ok().map(|dist| dist.sample(rng))
    }
}

/// Uniform probability over every cell whose center lies on a region
/// associated with `class_id`; all zeros if none does.
pub fn occupancy_grid<T: Real>(
    source: &SemanticSource<'_, T>,
    class_id: ClassId,
    catalog: &ClassCatalog,
    spec: GridSpec<T>,
    k: usize,
) -> Result<OccupancyGrid<T>> {
    spec.validate()?;
    let mut admissible = Vec::with_capacity(spec.cell_count());
    for i in 0..spec.cell_count() {
        let (x, y) = spec.cell_center(i);
        let ok = match semantic_lookup(source, &Point::xyz(x, y, T::zero()), k) {
            LabelLookup::Label(name) => catalog.is_associated(class_id, name)?,
            LabelLookup::BehindCamera | LabelLookup::OffMap => false,
        };
        admissible.push(ok);
    }
    let n = admissible.iter().filter(|a| **a).count();
    let p = if n == 0 { T::zero() } else { T::one() / T::lit(n as f64) };
    Ok(OccupancyGrid {
        spec,
        prob: admissible.into_iter().map(|a| if a { p } else { T::zero() }).collect(),
    })
}
