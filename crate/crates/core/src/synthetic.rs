//! Seeded street-scene corpus with top-down semantic maps, for exercising
//! the pipeline without a real dataset.
//!
//! Each frame is a straight road along +x with sidewalks on both sides and
//! buildings beyond. The road half-width varies per frame, so donor poses
//! from one frame can land on a different region in another. A downward
//! camera 50 m up maps ground `(x, y)` to pixel `(10x, 200 - 10y)`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{normalize_name, ClassCatalog};
use crate::error::{Error, Result};
use crate::ingest::{DatasetLayout, FrameBundle, FrameSemantics};
use crate::types::{
    Box3D, Calibration, ClassId, LabelId, Legend, Point, PointCloud, SemanticImageMap, SemanticPoint, SemanticPointMap,
};

pub const GROUND_Z: f64 = -1.7;
pub const IMAGE_WIDTH: u32 = 700;
pub const IMAGE_HEIGHT: u32 = 400;
const PIXELS_PER_METER: f64 = 10.0;
const SLOT_SPACING: f64 = 6.5;
const SIDEWALK_WIDTH: f64 = 4.0;

pub const ROAD: LabelId = 0;
pub const SIDEWALK: LabelId = 1;
pub const BUILDING: LabelId = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticKind {
    #[default]
    Image,
    Points,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub class: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub frames: usize,
    pub seed: u64,
    /// Objects per class over the whole corpus.
    pub mix: Vec<ClassShare>,
    pub ground_points: usize,
    pub semantics: SemanticKind,
    pub road_label: String,
    pub sidewalk_label: String,
    /// Range of the road half-width in meters.
    pub road_half_width: (f64, f64),
}

impl Default for SyntheticConfig {
    /// 50 frames, 500 objects split 83 / 13 / 4 % over car / pedestrian / cyclist.
    fn default() -> Self {
        let share = |class: &str, count| ClassShare {
            class: class.into(),
            count,
        };
        Self {
            frames: 50,
            seed: 0,
            mix: vec![share("Car", 415), share("Pedestrian", 65), share("Cyclist", 20)],
            ground_points: 1500,
            semantics: SemanticKind::Image,
            road_label: "road".into(),
            sidewalk_label: "sidewalk".into(),
            road_half_width: (4.0, 6.5),
        }
    }
}

/// Slots along the road, one object each.
pub const SLOTS_PER_FRAME: usize = 10;

pub fn legend(config: &SyntheticConfig) -> Legend {
    Legend::from([
        (ROAD, config.road_label.clone()),
        (SIDEWALK, config.sidewalk_label.clone()),
        (BUILDING, "building".into()),
    ])
}

/// The downward camera shared by every synthetic frame.
pub fn topdown_calibration() -> Calibration {
    let k = 500.0;
    let height = k / PIXELS_PER_METER;
    let extrinsic = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, height],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let intrinsic = [[k, 0.0, 0.0], [0.0, k, f64::from(IMAGE_HEIGHT) / 2.0], [0.0, 0.0, 1.0]];
    Calibration::new(intrinsic, extrinsic, IMAGE_WIDTH, IMAGE_HEIGHT).expect("valid camera")
}

fn region_at(y: f64, road_half: f64) -> LabelId {
    if y.abs() < road_half {
        ROAD
    } else if y.abs() < road_half + SIDEWALK_WIDTH {
        SIDEWALK
    } else {
        BUILDING
    }
}

fn image_map(road_half: f64, legend: &Legend) -> Result<SemanticImageMap> {
    let (w, h) = (IMAGE_WIDTH as usize, IMAGE_HEIGHT as usize);
    let mut labels = Vec::with_capacity(w * h);
    for v in 0..h {
        let y = (f64::from(IMAGE_HEIGHT) / 2.0 - (v as f64 + 0.5)) / PIXELS_PER_METER;
        let label = region_at(y, road_half) as u8;
        labels.extend(std::iter::repeat_n(label, w));
    }
    SemanticImageMap::new(IMAGE_WIDTH, IMAGE_HEIGHT, labels, legend.clone())
}

#[derive(Debug, Clone, Copy)]
enum Habitat {
    Road,
    Sidewalk,
    Either,
}

fn habitat(catalog: &ClassCatalog, id: ClassId, config: &SyntheticConfig) -> Result<Habitat> {
    let road = catalog.is_associated(id, &config.road_label)?;
    let walk = catalog.is_associated(id, &config.sidewalk_label)?;
    Ok(match (road, walk) {
        (true, true) => Habitat::Either,
        (false, true) => Habitat::Sidewalk,
        _ => Habitat::Road,
    })
}

fn dims(h: Habitat) -> (f64, f64, f64) {
    match h {
        Habitat::Road => (3.9, 1.6, 1.5),
        Habitat::Sidewalk => (0.8, 0.6, 1.75),
        Habitat::Either => (1.76, 0.6, 1.73),
    }
}

/// Points strictly inside `b`.
fn fill_box<R: Rng>(b: &Box3D, n: usize, rng: &mut R) -> Vec<Point> {
    let (s, c) = b.yaw.sin_cos();
    (0..n)
        .map(|_| {
            let lx = rng.random_range(-0.45..0.45) * b.l;
            let ly = rng.random_range(-0.45..0.45) * b.w;
            let lz = rng.random_range(-0.45..0.45) * b.h;
            Point::new(
                b.cx + c * lx - s * ly,
                b.cy + s * lx + c * ly,
                b.cz + lz,
                rng.random_range(0.0..1.0),
            )
        })
        .collect()
}

/// Generates the corpus. Class shares are shuffled over all slots, so
/// every frame sees a similar mix.
pub fn synthetic_corpus(config: &SyntheticConfig, catalog: &ClassCatalog) -> Result<Vec<FrameBundle>> {
    let (lo, hi) = config.road_half_width;
    if !(lo > 1.5 && hi >= lo && hi < 15.0) {
        return Err(Error::Config(format!(
            "road half-width range {lo}..{hi} must lie in (1.5, 15)"
        )));
    }
    let mut classes = Vec::new();
    for share in &config.mix {
        let id = catalog.require_id(&share.class)?;
        classes.extend(std::iter::repeat_n(id, share.count as usize));
    }
    if classes.len() > config.frames * SLOTS_PER_FRAME {
        return Err(Error::Config(format!(
            "{} objects do not fit in {} frames of {SLOTS_PER_FRAME} slots",
            classes.len(),
            config.frames
        )));
    }
    if normalize_name(&config.road_label) == normalize_name(&config.sidewalk_label) {
        return Err(Error::Config("road and sidewalk labels must differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    classes.shuffle(&mut rng);
    let legend = legend(config);
    let calib = topdown_calibration();

    let mut frames = Vec::with_capacity(config.frames);
    let total = classes.len();
    for f in 0..config.frames {
        let id = format!("{f:06}");
        let road_half = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let chunk = &classes[f * total / config.frames.max(1)..(f + 1) * total / config.frames.max(1)];
        let mut slots: Vec<usize> = (0..SLOTS_PER_FRAME).collect();
        slots.shuffle(&mut rng);

        let mut boxes = Vec::with_capacity(chunk.len());
        let mut points = Vec::new();
        for (class_id, slot) in chunk.iter().zip(slots) {
            let hab = habitat(catalog, *class_id, config)?;
            let (l, w, h) = dims(hab);
            let on_road = match hab {
                Habitat::Road => true,
                Habitat::Sidewalk => false,
                Habitat::Either => rng.random_bool(0.5),
            };
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (cy, yaw) = if on_road {
                let y = rng.random_range(-(road_half - 1.2)..(road_half - 1.2));
                let heading = if y > 0.0 { std::f64::consts::PI } else { 0.0 };
                (y, heading + rng.random_range(-0.1..0.1))
            } else {
                let y = side * rng.random_range(road_half + 0.8..road_half + SIDEWALK_WIDTH - 0.8);
                (y, rng.random_range(-3.1..3.1))
            };
            let cx = 5.0 + SLOT_SPACING * slot as f64 + rng.random_range(-0.5..0.5);
            let b = Box3D::new(cx, cy, GROUND_Z + h / 2.0, l, w, h, yaw, *class_id)?;
            let n = match hab {
                Habitat::Road => rng.random_range(40..90),
                Habitat::Sidewalk => rng.random_range(12..30),
                Habitat::Either => rng.random_range(18..40),
            };
            points.extend(fill_box(&b, n, &mut rng));
            boxes.push(b);
        }

        let half_y = f64::from(IMAGE_HEIGHT) / 2.0 / PIXELS_PER_METER;
        let x_max = f64::from(IMAGE_WIDTH) / PIXELS_PER_METER;
        let ground: Vec<Point> = (0..config.ground_points)
            .map(|_| {
                Point::new(
                    rng.random_range(0.0..x_max),
                    rng.random_range(-half_y..half_y),
                    GROUND_Z - 0.05,
                    rng.random_range(0.0..0.3),
                )
            })
            .collect();
        let semantic = match config.semantics {
            SemanticKind::Image => Some(FrameSemantics::Image(image_map(road_half, &legend)?)),
            SemanticKind::Points => {
                let labeled = ground
                    .iter()
                    .map(|p| SemanticPoint {
                        x: p.x,
                        y: p.y,
                        z: p.z,
                        label: region_at(p.y, road_half),
                    })
                    .collect();
                Some(FrameSemantics::Points(SemanticPointMap::new(labeled, legend.clone())?))
            }
            SemanticKind::None => None,
        };
        points.extend(ground);

        frames.push(FrameBundle {
            cloud: PointCloud::new(id.clone(), points),
            id,
            boxes,
            obstacles: Vec::new(),
            calib: calib.clone(),
            semantic,
        });
    }
    Ok(frames)
}

/// Writes `frames` as a KITTI-style dataset under `root`.
pub fn write_corpus(frames: &[FrameBundle], catalog: &ClassCatalog, root: &Path) -> Result<()> {
    let layout = DatasetLayout::new(root);
    std::fs::create_dir_all(root.join(crate::ingest::LABEL_DIR)).map_err(|e| Error::io(root, e))?;
    frames.iter().try_for_each(|f| layout.write_frame(f, catalog))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bev_iou, ground_anchor, semantic_lookup, LabelLookup};
    use crate::ingest::dataset_stats;

    #[test]
    fn default_mix_and_regions() {
        let catalog = ClassCatalog::kitti();
        let frames = synthetic_corpus(&SyntheticConfig::default(), &catalog).unwrap();
        assert_eq!(frames.len(), 50);
        let stats = dataset_stats(frames.iter().map(|f| f.boxes.as_slice()), &catalog).unwrap();
        assert_eq!(stats.total, 500);
        assert!((stats.row(ClassId(0)).unwrap().percent - 83.0).abs() < 1e-9);
        assert!((stats.row(ClassId(2)).unwrap().percent - 4.0).abs() < 1e-9);
        for f in &frames {
            let src = f.semantic_source().unwrap();
            for b in &f.boxes {
                match semantic_lookup(&src, &ground_anchor(b), 5) {
                    LabelLookup::Label(name) => {
                        assert!(catalog.is_associated(b.class_id, name).unwrap(), "{name}")
                    }
                    other => panic!("{other:?}"),
                }
            }
            for (i, a) in f.boxes.iter().enumerate() {
                for b in &f.boxes[i + 1..] {
                    assert_eq!(bev_iou(a, b), 0.0);
                }
            }
        }
    }

    #[test]
    fn image_maps_follow_the_camera() {
        let config = SyntheticConfig {
            road_half_width: (5.0, 5.0),
            frames: 1,
            mix: vec![],
            ..SyntheticConfig::default()
        };
        let frames = synthetic_corpus(&config, &ClassCatalog::kitti()).unwrap();
        let src = frames[0].semantic_source().unwrap();
        let at = |x, y| semantic_lookup(&src, &Point::xyz(x, y, 0.0), 5);
        assert_eq!(at(30.0, 0.0), LabelLookup::Label("road"));
        assert_eq!(at(30.0, -6.0), LabelLookup::Label("sidewalk"));
        assert_eq!(at(30.0, 12.0), LabelLookup::Label("building"));
        assert_eq!(at(80.0, 0.0), LabelLookup::OffMap);
    }

    #[test]
    fn point_semantics_agree_with_regions() {
        let config = SyntheticConfig {
            semantics: SemanticKind::Points,
            ..SyntheticConfig::default()
        };
        let catalog = ClassCatalog::kitti();
        let frames = synthetic_corpus(&config, &catalog).unwrap();
        let f = &frames[0];
        let src = f.semantic_source().unwrap();
        assert_eq!(
            semantic_lookup(&src, &Point::xyz(30.0, 0.0, 0.0), 5),
            LabelLookup::Label("road")
        );
    }

    #[test]
    fn corpus_is_seeded() {
        let catalog = ClassCatalog::kitti();
        let a = synthetic_corpus(
            &SyntheticConfig {
                frames: 5,
                mix: vec![ClassShare {
                    class: "Car".into(),
                    count: 20,
                }],
                ..SyntheticConfig::default()
            },
            &catalog,
        )
        .unwrap();
        let b = synthetic_corpus(
            &SyntheticConfig {
                frames: 5,
                mix: vec![ClassShare {
                    class: "Car".into(),
                    count: 20,
                }],
                ..SyntheticConfig::default()
            },
            &catalog,
        )
        .unwrap();
        assert_eq!(
            a.iter().map(|f| &f.cloud).collect::<Vec<_>>(),
            b.iter().map(|f| &f.cloud).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_overfull_mix_and_unknown_classes() {
        let catalog = ClassCatalog::kitti();
        let cfg = SyntheticConfig {
            frames: 1,
            mix: vec![ClassShare {
                class: "Car".into(),
                count: 11,
            }],
            ..SyntheticConfig::default()
        };
        assert!(synthetic_corpus(&cfg, &catalog).is_err());
        let cfg = SyntheticConfig {
            frames: 1,
            mix: vec![ClassShare {
                class: "Tram".into(),
                count: 1,
            }],
            ..SyntheticConfig::default()
        };
        assert!(synthetic_corpus(&cfg, &catalog).is_err());
    }
}
