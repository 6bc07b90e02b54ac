use std::fs;
use std::path::{Path, PathBuf};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::types::{Calibration, SemanticPoint};

use super::{
    parse_labels, read_calibration, read_point_cloud, read_semantic_map, read_semantic_points, write_calibration,
    write_labels, write_legend, write_point_cloud, write_semantic_map, FrameBundle, FrameSemantics, UnknownClassPolicy,
};

pub const VELODYNE_DIR: &str = "velodyne";
pub const LABEL_DIR: &str = "label_2";
pub const CALIB_DIR: &str = "calib";
pub const SEMANTIC_IMAGE_DIR: &str = "semantic_2";
pub const SEMANTIC_POINTS_DIR: &str = "semantic_points";
/// Legend shared by every frame in a semantic directory unless `<id>.legend` exists.
pub const SHARED_LEGEND: &str = "legend.txt";

/// KITTI-style dataset directory:
///
/// ```text
/// velodyne/<id>.bin  label_2/<id>.txt  calib/<id>.txt
/// semantic_2/<id>.sem           (+ <id>.legend or legend.txt)
/// semantic_points/<id>.bin + <id>.label   (+ <id>.legend or legend.txt)
/// ```
///
/// Frame ids are the label file stems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Prefixes the error message with the frame id.
fn in_frame<T>(id: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format { position, message } => Error::Format {
            position,
            message: format!("frame {id}: {message}"),
        },
        other => other,
    })
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn velodyne_path(&self, id: &str) -> PathBuf {
        self.root.join(VELODYNE_DIR).join(format!("{id}.bin"))
    }

    pub fn label_path(&self, id: &str) -> PathBuf {
        self.root.join(LABEL_DIR).join(format!("{id}.txt"))
    }

    pub fn calib_path(&self, id: &str) -> PathBuf {
        self.root.join(CALIB_DIR).join(format!("{id}.txt"))
    }

    pub fn semantic_image_path(&self, id: &str) -> PathBuf {
        self.root.join(SEMANTIC_IMAGE_DIR).join(format!("{id}.sem"))
    }

    pub fn semantic_cloud_path(&self, id: &str) -> PathBuf {
        self.root.join(SEMANTIC_POINTS_DIR).join(format!("{id}.bin"))
    }

    pub fn semantic_label_path(&self, id: &str) -> PathBuf {
        self.root.join(SEMANTIC_POINTS_DIR).join(format!("{id}.label"))
    }

    fn legend_path(&self, dir: &str, id: &str) -> PathBuf {
        let own = self.root.join(dir).join(format!("{id}.legend"));
        if own.exists() {
            own
        } else {
            self.root.join(dir).join(SHARED_LEGEND)
        }
    }

    /// Sorted frame ids. A dataset without a label directory has no frames.
    pub fn frame_ids(&self) -> Result<Vec<String>> {
        if !self.root.is_dir() {
            return Err(Error::io(
                &self.root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
            ));
        }
        let dir = self.root.join(LABEL_DIR);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn read_label_text(&self, id: &str) -> Result<String> {
        read_text(&self.label_path(id))
    }

    /// The frame's calibration, or an identity camera when the file is absent.
    pub fn read_calibration_or_identity(&self, id: &str) -> Result<Calibration> {
        let path = self.calib_path(id);
        if path.exists() {
            in_frame(id, read_calibration(&read_text(&path)?))
        } else {
            Ok(Calibration::identity(
                super::DEFAULT_IMAGE_WIDTH,
                super::DEFAULT_IMAGE_HEIGHT,
            ))
        }
    }

    /// Image semantics win over point semantics when both exist.
    pub fn read_semantics(&self, id: &str) -> Result<Option<FrameSemantics>> {
        let image = self.semantic_image_path(id);
        if image.exists() {
            let legend = read_text(&self.legend_path(SEMANTIC_IMAGE_DIR, id))?;
            return in_frame(id, read_semantic_map(&read_bytes(&image)?, &legend))
                .map(|m| Some(FrameSemantics::Image(m)));
        }
        let labels = self.semantic_label_path(id);
        if labels.exists() {
            let legend = read_text(&self.legend_path(SEMANTIC_POINTS_DIR, id))?;
            let cloud = read_bytes(&self.semantic_cloud_path(id))?;
            return in_frame(id, read_semantic_points(&cloud, &read_bytes(&labels)?, &legend))
                .map(|m| Some(FrameSemantics::Points(m)));
        }
        Ok(None)
    }

    pub fn load_frame(&self, id: &str, catalog: &ClassCatalog, policy: UnknownClassPolicy) -> Result<FrameBundle> {
        let mut frame = self.load_frame_without_semantics(id, catalog, policy)?;
        frame.semantic = self.read_semantics(id)?;
        Ok(frame)
    }

    /// Cloud, labels and calibration only.
    pub fn load_frame_without_semantics(
        &self,
        id: &str,
        catalog: &ClassCatalog,
        policy: UnknownClassPolicy,
    ) -> Result<FrameBundle> {
        let calib = in_frame(id, read_calibration(&read_text(&self.calib_path(id))?))?;
        let labels = in_frame(id, parse_labels(&self.read_label_text(id)?, &calib, catalog, policy))?;
        let cloud = in_frame(id, read_point_cloud(&read_bytes(&self.velodyne_path(id))?, id))?;
        Ok(FrameBundle {
            id: id.to_string(),
            cloud,
            boxes: labels.boxes,
            obstacles: labels.obstacles,
            calib,
            semantic: None,
        })
    }

    /// Writes cloud, catalog-class labels, calibration and semantics of `frame`.
    pub fn write_frame(&self, frame: &FrameBundle, catalog: &ClassCatalog) -> Result<()> {
        let id = &frame.id;
        write_file(&self.velodyne_path(id), &write_point_cloud(&frame.cloud))?;
        write_file(
            &self.label_path(id),
            write_labels(&frame.boxes, catalog, &frame.calib)?.as_bytes(),
        )?;
        write_file(&self.calib_path(id), write_calibration(&frame.calib).as_bytes())?;
        match &frame.semantic {
            None => {}
            Some(FrameSemantics::Image(map)) => {
                let (bytes, legend) = write_semantic_map(map);
                write_file(&self.semantic_image_path(id), &bytes)?;
                write_file(
                    &self.root.join(SEMANTIC_IMAGE_DIR).join(format!("{id}.legend")),
                    legend.as_bytes(),
                )?;
            }
            Some(FrameSemantics::Points(map)) => {
                let cloud = crate::types::PointCloud::new(
                    id.as_str(),
                    map.points()
                        .iter()
                        .map(|p: &SemanticPoint| crate::types::Point::xyz(p.x, p.y, p.z))
                        .collect(),
                );
                let labels: Vec<u8> = map
                    .points()
                    .iter()
                    .flat_map(|p| u32::from(p.label).to_le_bytes())
                    .collect();
                write_file(&self.semantic_cloud_path(id), &write_point_cloud(&cloud))?;
                write_file(&self.semantic_label_path(id), &labels)?;
                write_file(
                    &self.root.join(SEMANTIC_POINTS_DIR).join(format!("{id}.legend")),
                    write_legend(map.legend()).as_bytes(),
                )?;
            }
        }
        Ok(())
    }
}
