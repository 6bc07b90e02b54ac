//! Readers and writers for KITTI-layout artifacts and semantic maps, plus
//! per-class label statistics.

mod calib;
mod frame;
mod labels;
mod layout;
mod semantic;
mod stats;
mod velodyne;

pub use calib::{read_calibration, write_calibration, DEFAULT_IMAGE_HEIGHT, DEFAULT_IMAGE_WIDTH};
pub use frame::{FrameBundle, FrameSemantics};
pub use labels::{
    format_label_line, parse_label_line, parse_labels, read_labels, write_labels, LabelObject, ParsedLabels,
    UnknownClassPolicy, OBSTACLE_CLASS,
};
pub use layout::{
    DatasetLayout, CALIB_DIR, LABEL_DIR, SEMANTIC_IMAGE_DIR, SEMANTIC_POINTS_DIR, SHARED_LEGEND, VELODYNE_DIR,
};
pub use semantic::{
    parse_legend, read_semantic_map, read_semantic_points, write_legend, write_semantic_map, SEMANTIC_MAGIC,
};
pub use stats::{dataset_stats, ClassCount, ClassStats};
pub use velodyne::{read_point_cloud, write_point_cloud, POINT_RECORD_BYTES};
