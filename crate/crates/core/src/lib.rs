//! Class-imbalance tooling for LiDAR 3D object detection.
//!
//! * [`gtdb`] builds and queries an offline database of labeled object point clusters.
//! * [`sampler`] pastes database objects into frames, keeping only placements that
//!   land on semantically plausible ground (pedestrians on sidewalks, cars on roads)
//!   and do not collide with existing objects.
//! * [`balance`] computes Dynamic Weight Average weights for per-class detection heads.
//!
//! Geometry and balancing code is generic over [`Real`] (`f32` / `f64`); the
//! dataset pipeline runs in `f64`. Type parameters default to `f64`, and
//! single-precision aliases are exported below.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod catalog;
pub mod error;
pub mod geometry;
pub mod gtdb;
pub mod ingest;
pub mod sampler;
pub mod scalar;
pub mod synthetic;
pub mod types;

pub use balance::{DwaConfig, DwaScheduler, LossSnapshot, WeightTrajectory, WeightVector};
pub use catalog::ClassCatalog;
pub use error::{Error, ErrorClass, Result};
pub use gtdb::{GtDatabase, GtRecord};
pub use ingest::FrameBundle;
pub use sampler::{AugmentedFrame, SamplerConfig};
pub use scalar::Real;
pub use types::{
    Box3D, Calibration, ClassId, LabelId, Legend, Point, PointCloud, SemanticImageMap, SemanticPoint, SemanticPointMap,
};

pub type PointF32 = types::Point<f32>;
pub type PointCloudF32 = types::PointCloud<f32>;
pub type Box3DF32 = types::Box3D<f32>;
pub type CalibrationF32 = types::Calibration<f32>;
pub type OccupancyGridF32 = geometry::OccupancyGrid<f32>;
pub type PillarGridF32 = geometry::PillarGrid<f32>;
pub type WeightVectorF32 = balance::WeightVector<f32>;
pub type DwaSchedulerF32 = balance::DwaScheduler<f32>;
pub type DwaConfigF32 = balance::DwaConfig<f32>;
pub type LossSnapshotF32 = balance::LossSnapshot<f32>;
