//! Metric geometry over LiDAR points and oriented boxes.

pub mod camera;
pub mod iou;
pub mod mat;
pub mod obb;
pub mod occupancy;
pub mod pillar;

pub use camera::{
    back_project, box_camera_to_lidar, box_lidar_to_camera, image_bbox, project_to_image, CameraBox, Pixel, Projection,
};
pub use iou::{bev_iou, polygon_area};
pub use obb::{
    bev_corners, extract_points_in_box, from_box_frame, ground_anchor, point_in_obb, point_in_obb_with_margin,
    to_box_frame,
};
pub use occupancy::{knn_label, occupancy_grid, semantic_lookup, GridSpec, LabelLookup, OccupancyGrid, SemanticSource};
pub use pillar::{pillarize, Pillar, PillarGrid, PillarPoint, PillarSpec};
