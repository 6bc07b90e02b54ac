use crate::geometry::SemanticSource;
use crate::types::{Box3D, Calibration, PointCloud, SemanticImageMap, SemanticPointMap};

#[derive(Debug, Clone)]
pub enum FrameSemantics {
    Image(SemanticImageMap),
    Points(SemanticPointMap),
}

/// Everything known about one LiDAR frame.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub id: String,
    pub cloud: PointCloud,
    /// Catalog-class boxes in the LiDAR frame.
    pub boxes: Vec<Box3D>,
    /// Other labeled objects; only used to block colliding placements.
    pub obstacles: Vec<Box3D>,
    pub calib: Calibration,
    pub semantic: Option<FrameSemantics>,
}

impl FrameBundle {
    pub fn has_semantics(&self) -> bool {
        self.semantic.is_some()
    }

    pub fn semantic_source(&self) -> Option<SemanticSource<'_>> {
        self.semantic.as_ref().map(|s| match s {
            FrameSemantics::Image(map) => SemanticSource::Image {
                map,
                calib: &self.calib,
            },
            FrameSemantics::Points(map) => SemanticSource::Points(map),
        })
    }
}
