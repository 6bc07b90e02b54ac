//! Contextual ground-truth sampling.
//!
//! Database records are proposed at candidate poses, checked against the
//! semantic region under their ground anchor and against every box already
//! in the frame, and the survivors are pasted into the cloud.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::geometry::{
    bev_iou, ground_anchor, occupancy_grid, point_in_obb, semantic_lookup, GridSpec, LabelLookup, OccupancyGrid,
};
use crate::gtdb::{query, GtDatabase, GtRecord};
use crate::ingest::FrameBundle;
use crate::types::{Box3D, ClassId, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalMode {
    /// Paste each record where it was cut out.
    #[default]
    KeepDonorPose,
    /// Draw the center from the class occupancy grid, yaw uniform.
    OccupancySample,
}

impl fmt::Display for ProposalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProposalMode::KeepDonorPose => "keep-donor-pose",
            ProposalMode::OccupancySample => "occupancy-sample",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: ProposalMode,
    /// Apply the semantic filter. Off reproduces plain GT sampling.
    pub contextual: bool,
    /// Largest BEV IoU tolerated against any other box.
    pub tau: f64,
    /// Neighbors voting in the point-map classifier.
    pub k: usize,
    /// Candidate poses per record in occupancy mode.
    pub retry: usize,
    /// Accept anchors that fall outside the camera view.
    pub permissive_off_map: bool,
    pub grid: GridSpec,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: ProposalMode::KeepDonorPose,
            contextual: true,
            tau: 0.0,
            k: 5,
            retry: 10,
            permissive_off_map: false,
            grid: GridSpec {
                x_min: 0.0,
                y_min: -40.0,
                cell_size: 0.4,
                nx: 176,
                ny: 200,
            },
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Validation(format!("tau must be in [0, 1], got {}", self.tau)));
        }
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if self.retry == 0 {
            return Err(Error::Validation("retry budget must be at least 1".into()));
        }
        self.grid.validate().map_err(|e| Error::Validation(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NonAssociatedRegion,
    Collision,
    OffMap,
    BehindCamera,
}

impl RejectReason {
    pub const ALL: [RejectReason; 4] = [
        RejectReason::NonAssociatedRegion,
        RejectReason::Collision,
        RejectReason::OffMap,
        RejectReason::BehindCamera,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NonAssociatedRegion => "non-associated-region",
            RejectReason::Collision => "collision",
            RejectReason::OffMap => "off-map",
            RejectReason::BehindCamera => "behind-camera",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verdict", content = "reason")]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn of(b: &Box3D) -> Self {
        Self {
            x: b.cx,
            y: b.cy,
            z: b.cz,
            yaw: b.yaw,
        }
    }

    pub fn apply(&self, b: &Box3D) -> Box3D {
        b.with_pose(self.x, self.y, self.z, self.yaw)
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub record_id: u64,
    pub class_id: ClassId,
    pub source_frame: String,
    pub pose: Pose,
    pub mode: ProposalMode,
    #[serde(flatten)]
    pub verdict: Verdict,
}

impl Placement {
    /// The record's box at this placement's pose.
    pub fn placed_box(&self, record: &GtRecord) -> Box3D {
        Box3D {
            class_id: self.class_id,
            ..self.pose.apply(&record.source_box)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassAudit {
    pub target: u32,
    /// Records drawn from the database.
    pub drawn: usize,
    /// Candidate poses evaluated.
    pub proposals: usize,
    pub accepted: usize,
    pub rejections: BTreeMap<RejectReason, usize>,
}

impl ClassAudit {
    fn reject(&mut self, reason: RejectReason) {
        *self.rejections.entry(reason).or_default() += 1;
    }

    pub fn rejected(&self) -> usize {
        self.rejections.values().sum()
    }

    pub fn merge(&mut self, other: &ClassAudit) {
        self.target = self.target.max(other.target);
        self.drawn += other.drawn;
        self.proposals += other.proposals;
        self.accepted += other.accepted;
        for (r, n) in &other.rejections {
            *self.rejections.entry(*r).or_default() += n;
        }
    }
}

/// Per-frame telemetry, keyed by class name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameAudit {
    pub frame_id: String,
    pub classes: BTreeMap<String, ClassAudit>,
    /// Original points dropped because an inserted box covers them.
    pub removed_points: usize,
    pub inserted_points: usize,
    pub placements: Vec<Placement>,
}

impl FrameAudit {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Validation(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedFrame {
    pub id: String,
    pub cloud: PointCloud,
    /// Original boxes followed by inserted ones.
    pub boxes: Vec<Box3D>,
    pub original_boxes: usize,
    pub inserted: Vec<Placement>,
    pub audit: FrameAudit,
}

impl AugmentedFrame {
    pub fn inserted_boxes(&self) -> &[Box3D] {
        &self.boxes[self.original_boxes..]
    }
}

/// Generator for one frame, seeded from `sha256(seed || frame_id)`.
pub fn frame_rng(seed: u64, frame_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(frame_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform yaw on `(-pi, pi]`.
fn uniform_yaw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    std::f64::consts::PI - std::f64::consts::TAU * u
}

/// Candidate poses for `record`. Occupancy mode needs the class grid; an
/// empty or missing grid yields no candidates.
pub fn propose_placements<R: Rng + ?Sized>(
    record: &GtRecord,
    mode: ProposalMode,
    grid: Option<&OccupancyGrid>,
    retry: usize,
    rng: &mut R,
) -> Vec<Pose> {
    match mode {
        ProposalMode::KeepDonorPose => vec![Pose::of(&record.source_box)],
        ProposalMode::OccupancySample => {
            let Some(grid) = grid.filter(|g| !g.is_empty()) else {
                return Vec::new();
            };
            (0..retry)
                .filter_map(|_| {
                    let cell = grid.sample_cell(rng)?;
                    let (x, y) = grid.spec.cell_center(cell);
                    Some(Pose {
                        x,
                        y,
                        z: record.source_box.cz,
                        yaw: uniform_yaw(rng),
                    })
                })
                .collect()
        }
    }
}

/// Checks the semantic region under the ground anchor of `placed`.
pub fn semantic_filter(
    placed: &Box3D,
    class_id: ClassId,
    frame: &FrameBundle,
    catalog: &ClassCatalog,
    config: &SamplerConfig,
) -> Result<Verdict> {
    let source = frame
        .semantic_source()
        .ok_or_else(|| Error::Config(format!("frame {} has no semantic source", frame.id)))?;
    Ok(match semantic_lookup(&source, &ground_anchor(placed), config.k) {
        LabelLookup::Label(name) if catalog.is_associated(class_id, name)? => Verdict::Accepted,
        LabelLookup::Label(_) => Verdict::Rejected(RejectReason::NonAssociatedRegion),
        _ if config.permissive_off_map => Verdict::Accepted,
        LabelLookup::BehindCamera => Verdict::Rejected(RejectReason::BehindCamera),
        LabelLookup::OffMap => Verdict::Rejected(RejectReason::OffMap),
    })
}

/// Accepts iff `placed` overlaps no box in `others` by more than `tau`.
pub fn collision_filter<'a>(placed: &Box3D, others: impl IntoIterator<Item = &'a Box3D>, tau: f64) -> Verdict {
    if others.into_iter().any(|o| bev_iou(placed, o) > tau) {
        Verdict::Rejected(RejectReason::Collision)
    } else {
        Verdict::Accepted
    }
}

/// Uniform grid over every cell, used for occupancy proposals without semantics.
fn uniform_grid(spec: GridSpec) -> OccupancyGrid {
    let n = spec.cell_count();
    OccupancyGrid {
        spec,
        prob: vec![1.0 / n as f64; n],
    }
}

/// Inserts database objects into `frame`, class by class in catalog order.
pub fn augment_frame<R: Rng + ?Sized>(
    frame: &FrameBundle,
    db: &GtDatabase,
    catalog: &ClassCatalog,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<AugmentedFrame> {
    config.validate()?;
    for (id, name) in db.class_names() {
        if catalog.name(*id).ok() != Some(name.as_str()) {
            return Err(Error::Config(format!(
                "database class `{name}` does not match the catalog"
            )));
        }
    }
    if config.contextual && !frame.has_semantics() {
        return Err(Error::Config(format!("frame {} has no semantic source", frame.id)));
    }

    let mut audit = FrameAudit {
        frame_id: frame.id.clone(),
        ..FrameAudit::default()
    };
    let mut occupied: Vec<Box3D> = frame.boxes.iter().chain(&frame.obstacles).copied().collect();
    let mut inserted: Vec<(Placement, &GtRecord)> = Vec::new();

    for class_id in catalog.ids() {
        let target = catalog.target(class_id)?;
        let mut class_audit = ClassAudit {
            target,
            ..ClassAudit::default()
        };
        if target > 0 && db.class_names().contains_key(&class_id) {
            let grid = match (config.mode, config.contextual) {
                (ProposalMode::OccupancySample, true) => {
                    let source = frame.semantic_source().expect("checked above");
                    Some(occupancy_grid(&source, class_id, catalog, config.grid, config.k)?)
                }
                (ProposalMode::OccupancySample, false) => Some(uniform_grid(config.grid)),
                (ProposalMode::KeepDonorPose, _) => None,
            };
            let records = query(db, class_id, target as usize, rng)?;
            class_audit.drawn = records.len();
            for record in records {
                let poses = propose_placements(record, config.mode, grid.as_ref(), config.retry, rng);
                if poses.is_empty() {
                    class_audit.reject(RejectReason::OffMap);
                }
                for pose in poses {
                    class_audit.proposals += 1;
                    let mut placement = Placement {
                        record_id: record.id,
                        class_id,
                        source_frame: record.source_frame.clone(),
                        pose,
                        mode: config.mode,
                        verdict: Verdict::Accepted,
                    };
                    let placed = placement.placed_box(record);
                    let mut verdict = if config.contextual {
                        semantic_filter(&placed, class_id, frame, catalog, config)?
                    } else {
                        Verdict::Accepted
                    };
                    if verdict.is_accepted() {
                        verdict = collision_filter(&placed, &occupied, config.tau);
                    }
                    placement.verdict = verdict;
                    audit.placements.push(placement.clone());
                    match verdict {
                        Verdict::Accepted => {
                            class_audit.accepted += 1;
                            occupied.push(placed);
                            inserted.push((placement, record));
                            break;
                        }
                        Verdict::Rejected(reason) => class_audit.reject(reason),
                    }
                }
            }
        }
        audit.classes.insert(catalog.name(class_id)?.to_string(), class_audit);
    }

    let new_boxes: Vec<Box3D> = inserted.iter().map(|(p, r)| p.placed_box(r)).collect();
    let mut points: Vec<_> = frame
        .cloud
        .points
        .iter()
        .filter(|p| !new_boxes.iter().any(|b| point_in_obb(p, b)))
        .copied()
        .collect();
    audit.removed_points = frame.cloud.len() - points.len();
    for ((_, record), b) in inserted.iter().zip(&new_boxes) {
        points.extend(record.points_at(b));
        audit.inserted_points += record.num_points;
    }

    let mut boxes = frame.boxes.clone();
    boxes.extend(new_boxes);
    Ok(AugmentedFrame {
        id: frame.id.clone(),
        cloud: PointCloud::new(frame.cloud.frame_id.clone(), points),
        original_boxes: frame.boxes.len(),
        boxes,
        inserted: inserted.into_iter().map(|(p, _)| p).collect(),
        audit,
    })
}
