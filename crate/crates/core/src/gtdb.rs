//! Offline database of labeled object point clusters.
//!
//! Each record keeps the object's points in its own box frame, so pasting it
//! at a new pose is a single rigid transform. On disk a database is a
//! directory holding `index.jsonl`, `points.blob` and `meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Position, Result};
use crate::geometry::{from_box_frame, point_in_obb, to_box_frame};
use crate::ingest::{FrameBundle, POINT_RECORD_BYTES};
use crate::types::{Box3D, ClassId, Point, PointCloud};

pub const DB_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.jsonl";
pub const BLOB_FILE: &str = "points.blob";
pub const META_FILE: &str = "meta.json";

/// One labeled object cut out of a source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub id: u64,
    pub class_id: ClassId,
    /// The labeled box in its source frame.
    pub source_box: Box3D,
    /// Box-local points (`f32` precision).
    pub points: PointCloud,
    pub source_frame: String,
    pub num_points: usize,
}

impl GtRecord {
    /// The record's box at the origin with zero heading.
    pub fn canonical_box(&self) -> Box3D {
        self.source_box.with_pose(0.0, 0.0, 0.0, 0.0)
    }

    /// Points moved to the pose of `placed`.
    pub fn points_at(&self, placed: &Box3D) -> Vec<Point> {
        self.points
            .points
            .iter()
            .map(|p| {
                let [x, y, z] = from_box_frame([p.x, p.y, p.z], placed);
                Point::new(x, y, z, p.intensity)
            })
            .collect()
    }

    fn validate(&self) -> bool {
        let canonical = self.canonical_box();
        self.num_points == self.points.len() && self.points.points.iter().all(|p| point_in_obb(p, &canonical))
    }
}

/// Database records grouped by class, with build provenance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtDatabase {
    records: BTreeMap<ClassId, Vec<GtRecord>>,
    class_names: BTreeMap<ClassId, String>,
    catalog_hash: String,
    skipped: BTreeMap<ClassId, usize>,
    frames: usize,
}

impl GtDatabase {
    /// An empty database bound to `catalog`.
    pub fn empty(catalog: &ClassCatalog) -> Self {
        let mut db = Self {
            catalog_hash: catalog.content_hash(),
            ..Self::default()
        };
        for id in catalog.ids() {
            let name = catalog.name(id).expect("catalog id").to_string();
            db.class_names.insert(id, name);
            db.records.insert(id, Vec::new());
            db.skipped.insert(id, 0);
        }
        db
    }

    pub fn catalog_hash(&self) -> &str {
        &self.catalog_hash
    }

    pub fn class_names(&self) -> &BTreeMap<ClassId, String> {
        &self.class_names
    }

    pub fn records(&self, class_id: ClassId) -> &[GtRecord] {
        self.records.get(&class_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &GtRecord> {
        self.records.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> BTreeMap<ClassId, usize> {
        self.records.iter().map(|(c, r)| (*c, r.len())).collect()
    }

    /// Boxes dropped for having too few points, per class.
    pub fn skipped(&self) -> &BTreeMap<ClassId, usize> {
        &self.skipped
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, id: u64) -> Option<&GtRecord> {
        self.iter().find(|r| r.id == id)
    }
}

/// Rounds a box-local coordinate to `f32` without leaving `[-half, half]`.
fn quantize(v: f64, half: f64) -> f32 {
    let mut q = v as f32;
    while f64::from(q) > half {
        q = q.next_down();
    }
    while f64::from(q) < -half {
        q = q.next_up();
    }
    q
}

/// Records for every catalog box in `frame` (ids unassigned) and the
/// classes of boxes skipped as too sparse.
pub fn extract_records(frame: &FrameBundle, catalog: &ClassCatalog) -> (Vec<GtRecord>, Vec<ClassId>) {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for b in &frame.boxes {
        let Ok(min_points) = catalog.min_points(b.class_id) else {
            warn!("frame {}: box with class {} outside the catalog", frame.id, b.class_id);
            continue;
        };
        let (hl, hw, hh) = (b.l * 0.5, b.w * 0.5, b.h * 0.5);
        let points: Vec<Point> = frame
            .cloud
            .points
            .iter()
            .filter(|p| point_in_obb(p, b))
            .map(|p| {
                let [x, y, z] = to_box_frame(p, b);
                Point::new(
                    f64::from(quantize(x, hl)),
                    f64::from(quantize(y, hw)),
                    f64::from(quantize(z, hh)),
                    f64::from(p.intensity as f32),
                )
            })
            .collect();
        if points.len() < min_points as usize {
            skipped.push(b.class_id);
            continue;
        }
        records.push(GtRecord {
            id: 0,
            class_id: b.class_id,
            source_box: *b,
            num_points: points.len(),
            points: PointCloud::new(frame.id.clone(), points),
            source_frame: frame.id.clone(),
        });
    }
    (records, skipped)
}

/// Incremental single-writer builder; frames may arrive in any order.
#[derive(Debug)]
pub struct DatabaseBuilder {
    db: GtDatabase,
    pending: Vec<(String, Vec<GtRecord>)>,
}

impl DatabaseBuilder {
    pub fn new(catalog: &ClassCatalog) -> Self {
        Self {
            db: GtDatabase::empty(catalog),
            pending: Vec::new(),
        }
    }

    pub fn add_extracted(&mut self, frame_id: &str, records: Vec<GtRecord>, skipped: Vec<ClassId>) {
        for c in skipped {
            *self.db.skipped.entry(c).or_default() += 1;
        }
        self.db.frames += 1;
        self.pending.push((frame_id.to_string(), records));
    }

    pub fn add_frame(&mut self, frame: &FrameBundle, catalog: &ClassCatalog) {
        let (records, skipped) = extract_records(frame, catalog);
        self.add_extracted(&frame.id, records, skipped);
    }

    /// Orders records by source frame id and assigns sequential ids.
    pub fn finish(mut self) -> GtDatabase {
        self.pending.sort_by(|a, b| a.0.cmp(&b.0));
        if self.pending.windows(2).any(|w| w[0].0 == w[1].0) {
            warn!("duplicate frame ids; record order among them follows arrival order");
        }
        for (_, records) in self.pending {
            for r in records {
                self.db.records.entry(r.class_id).or_default().push(r);
            }
        }
        let mut next = 0u64;
        for records in self.db.records.values_mut() {
            for r in records {
                r.id = next;
                next += 1;
            }
        }
        debug!("built database: {} records from {} frames", next, self.db.frames);
        self.db
    }
}

/// Extracts every frame in parallel and merges the records.
pub fn build_database(frames: &[FrameBundle], catalog: &ClassCatalog) -> GtDatabase {
    let extracted: Vec<_> = frames
        .par_iter()
        .map(|f| (f.id.as_str(), extract_records(f, catalog)))
        .collect();
    let mut builder = DatabaseBuilder::new(catalog);
    for (id, (records, skipped)) in extracted {
        builder.add_extracted(id, records, skipped);
    }
    builder.finish()
}

/// Up to `n` distinct records of `class_id`, drawn uniformly.
pub fn query<'a, R: Rng + ?Sized>(
    db: &'a GtDatabase,
    class_id: ClassId,
    n: usize,
    rng: &mut R,
) -> Result<Vec<&'a GtRecord>> {
    if !db.class_names.contains_key(&class_id) {
        return Err(Error::Lookup(format!("class {class_id} is not in the database")));
    }
    let pool = db.records(class_id);
    let n = n.min(pool.len());
    Ok(rand::seq::index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| &pool[i])
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    id: u64,
    class: String,
    dims: [f64; 3],
    pose: [f64; 4],
    source_frame: String,
    offset: u64,
    length: u64,
    num_points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    version: u32,
    catalog_hash: String,
    frames: usize,
    counts: BTreeMap<String, usize>,
    skipped: BTreeMap<String, usize>,
    index_sha256: String,
    blob_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serialized `(index, blob, meta)` file contents.
pub fn encode(db: &GtDatabase) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>)> {
    let mut index = Vec::new();
    let mut blob = Vec::new();
    for r in db.iter() {
        let offset = blob.len() as u64;
        for p in &r.points.points {
            for v in [p.x, p.y, p.z, p.intensity] {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let b = &r.source_box;
        let entry = IndexEntry {
            id: r.id,
            class: db.class_names[&r.class_id].clone(),
            dims: [b.l, b.w, b.h],
            pose: [b.cx, b.cy, b.cz, b.yaw],
            source_frame: r.source_frame.clone(),
            offset,
            length: blob.len() as u64 - offset,
            num_points: r.num_points,
        };
        serde_json::to_writer(&mut index, &entry).map_err(|e| Error::Validation(e.to_string()))?;
        index.push(b'\n');
    }
    let by_name = |m: &BTreeMap<ClassId, usize>| -> BTreeMap<String, usize> {
        m.iter().map(|(c, n)| (db.class_names[c].clone(), *n)).collect()
    };
    let meta = Meta {
        version: DB_VERSION,
        catalog_hash: db.catalog_hash.clone(),
        frames: db.frames,
        counts: by_name(&db.counts()),
        skipped: by_name(&db.skipped),
        index_sha256: sha256_hex(&index),
        blob_sha256: sha256_hex(&blob),
    };
    let mut meta_bytes = serde_json::to_vec_pretty(&meta).map_err(|e| Error::Validation(e.to_string()))?;
    meta_bytes.push(b'\n');
    Ok((index, blob, meta_bytes))
}

/// Parses database file contents against `catalog`.
pub fn decode(index: &[u8], blob: &[u8], meta: &[u8], catalog: &ClassCatalog) -> Result<GtDatabase> {
    let meta: Meta =
        serde_json::from_slice(meta).map_err(|e| Error::format(Position::Line(e.line()), e.to_string()))?;
    if meta.version != DB_VERSION {
        return Err(Error::Version {
            found: meta.version,
            expected: DB_VERSION,
        });
    }
    if sha256_hex(index) != meta.index_sha256 {
        return Err(Error::Checksum(INDEX_FILE.into()));
    }
    if sha256_hex(blob) != meta.blob_sha256 {
        return Err(Error::Checksum(BLOB_FILE.into()));
    }
    if meta.catalog_hash != catalog.content_hash() {
        warn!("database was built with a different class catalog");
    }
    let mut db = GtDatabase::empty(catalog);
    db.catalog_hash = meta.catalog_hash;
    db.frames = meta.frames;
    for (name, n) in &meta.skipped {
        let id = catalog
            .id_of(name)
            .ok_or_else(|| Error::format(Position::Key(name.clone()), "class not in catalog"))?;
        db.skipped.insert(id, *n);
    }
    let text = std::str::from_utf8(index)
        .map_err(|e| Error::format(Position::Byte(e.valid_up_to() as u64), "index is not UTF-8"))?;
    for (i, line) in text.lines().enumerate() {
        let pos = || Position::Line(i + 1);
        let e: IndexEntry = serde_json::from_str(line).map_err(|err| Error::format(pos(), err.to_string()))?;
        let class_id = catalog
            .id_of(&e.class)
            .ok_or_else(|| Error::format(pos(), format!("class `{}` not in catalog", e.class)))?;
        let (start, len) = (e.offset as usize, e.length as usize);
        if len != e.num_points * POINT_RECORD_BYTES || start.checked_add(len).is_none_or(|end| end > blob.len()) {
            return Err(Error::format(pos(), "blob range does not match the point count"));
        }
        let points: Vec<Point> = blob[start..start + len]
            .chunks_exact(POINT_RECORD_BYTES)
            .map(|rec| {
                let v: Vec<f64> = rec
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                    .collect();
                Point::new(v[0], v[1], v[2], v[3])
            })
            .collect();
        let source_box = Box3D::new(
            e.pose[0], e.pose[1], e.pose[2], e.dims[0], e.dims[1], e.dims[2], e.pose[3], class_id,
        )
        .map_err(|err| Error::format(pos(), err.to_string()))?;
        let record = GtRecord {
            id: e.id,
            class_id,
            source_box,
            points: PointCloud::new(e.source_frame.clone(), points),
            source_frame: e.source_frame,
            num_points: e.num_points,
        };
        if !record.validate() {
            return Err(Error::format(pos(), "stored points fall outside the record's box"));
        }
        db.records.entry(class_id).or_default().push(record);
    }
    for (name, n) in &meta.counts {
        let id = catalog
            .id_of(name)
            .ok_or_else(|| Error::format(Position::Key(name.clone()), "class not in catalog"))?;
        if db.records(id).len() != *n {
            return Err(Error::format(
                Position::Key(name.clone()),
                format!("meta lists {n} records, index holds {}", db.records(id).len()),
            ));
        }
    }
    Ok(db)
}

/// Writes the database into `dir`, creating it if needed.
pub fn save(db: &GtDatabase, dir: &Path) -> Result<()> {
    let (index, blob, meta) = encode(db)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in [(INDEX_FILE, &index), (BLOB_FILE, &blob), (META_FILE, &meta)] {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load(dir: &Path, catalog: &ClassCatalog) -> Result<GtDatabase> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read(&path).map_err(|e| Error::io(&path, e))
    };
    decode(&read(INDEX_FILE)?, &read(BLOB_FILE)?, &read(META_FILE)?, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Calibration;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(id: &str, points: Vec<Point>, boxes: Vec<Box3D>) -> FrameBundle {
        FrameBundle {
            id: id.into(),
            cloud: PointCloud::new(id, points),
            boxes,
            obstacles: vec![],
            calib: Calibration::identity(100, 100),
            semantic: None,
        }
    }

    fn catalog_min(min: u32) -> ClassCatalog {
        let mut spec = ClassCatalog::kitti().to_spec();
        for c in &mut spec.classes {
            c.min_points = min;
        }
        ClassCatalog::from_spec(spec).unwrap()
    }

    fn car(cx: f64, cy: f64, yaw: f64) -> Box3D {
        Box3D::new(cx, cy, -0.8, 4.0, 1.8, 1.6, yaw, ClassId(0)).unwrap()
    }

    fn random_frame(id: &str, seed: u64) -> FrameBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes: Vec<Box3D> = (0..3)
            .map(|i| {
                let b = car(
                    10.0 + 8.0 * i as f64,
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-3.0..3.0),
                );
                Box3D {
                    class_id: ClassId(i as u16),
                    ..b
                }
            })
            .collect();
        let mut points = Vec::new();
        for b in &boxes {
            for _ in 0..rng.random_range(2..20) {
                let local = [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-0.9..0.9),
                    rng.random_range(-0.8..0.8),
                ];
                let [x, y, z] = from_box_frame(local, b);
                points.push(Point::new(x, y, z, rng.random_range(0.0..1.0)));
            }
        }
        for _ in 0..50 {
            points.push(Point::new(
                rng.random_range(0.0..60.0),
                rng.random_range(-30.0..30.0),
                -1.7,
                0.1,
            ));
        }
        frame(id, points, boxes)
    }

    #[test]
    fn three_points_make_one_record() {
        let b = car(5.0, 0.0, 0.3);
        let pts = vec![
            Point::xyz(5.0, 0.0, -0.8),
            Point::xyz(5.5, 0.2, -0.5),
            Point::xyz(4.5, -0.2, -1.0),
            Point::xyz(30.0, 0.0, 0.0),
        ];
        let db = build_database(&[frame("a", pts.clone(), vec![b])], &catalog_min(3));
        assert_eq!(db.len(), 1);
        assert_eq!(db.records(ClassId(0))[0].num_points, 3);
        let db = build_database(&[frame("a", pts, vec![b])], &catalog_min(5));
        assert!(db.is_empty());
        assert_eq!(db.skipped()[&ClassId(0)], 1);
    }

    #[test]
    fn pasting_at_source_pose_reproduces_points() {
        let f = random_frame("000007", 3);
        let db = build_database(std::slice::from_ref(&f), &catalog_min(1));
        for r in db.iter() {
            let original: Vec<&Point> = f
                .cloud
                .points
                .iter()
                .filter(|p| point_in_obb(p, &r.source_box))
                .collect();
            let pasted = r.points_at(&r.source_box);
            assert_eq!(original.len(), pasted.len());
            for (o, p) in original.iter().zip(&pasted) {
                assert!((o.x - p.x).abs() < 1e-6 && (o.y - p.y).abs() < 1e-6 && (o.z - p.z).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn boundary_points_stay_inside_after_quantization() {
        let b = car(0.1, 0.2, 0.7);
        let on_face: Vec<Point> = [[2.0, 0.0, 0.0], [-2.0, 0.9, 0.8], [1.999_999_9, -0.9, -0.8]]
            .iter()
            .map(|l| {
                let [x, y, z] = from_box_frame(*l, &b);
                Point::xyz(x, y, z)
            })
            .filter(|p| point_in_obb(p, &b))
            .collect();
        let n = on_face.len();
        let db = build_database(&[frame("f", on_face, vec![b])], &catalog_min(1));
        if n > 0 {
            assert!(db.records(ClassId(0))[0].validate());
        }
    }

    #[test]
    fn query_contract() {
        let db = build_database(
            &[random_frame("a", 1), random_frame("b", 2), random_frame("c", 3)],
            &catalog_min(1),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(query(&db, ClassId(0), 0, &mut rng).unwrap().is_empty());
        assert_eq!(
            query(&db, ClassId(0), 99, &mut rng).unwrap().len(),
            db.records(ClassId(0)).len()
        );
        assert!(matches!(query(&db, ClassId(9), 1, &mut rng), Err(Error::Lookup(_))));
        let ids = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            query(&db, ClassId(0), 2, &mut rng)
                .unwrap()
                .iter()
                .map(|r| r.id)
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(42), ids(42));
        let picked = ids(42);
        assert_eq!(picked.len(), 2);
        assert_ne!(picked[0], picked[1]);
    }

    #[test]
    fn empty_and_single_record_round_trip() {
        let c = catalog_min(1);
        let dir = tempfile::tempdir().unwrap();
        let empty = GtDatabase::empty(&c);
        save(&empty, dir.path()).unwrap();
        assert_eq!(load(dir.path(), &c).unwrap(), empty);

        let one = build_database(
            &[frame("x", vec![Point::xyz(0.0, 0.0, -0.8)], vec![car(0.0, 0.0, 1.0)])],
            &c,
        );
        assert_eq!(one.len(), 1);
        save(&one, dir.path()).unwrap();
        assert_eq!(load(dir.path(), &c).unwrap(), one);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let c = catalog_min(1);
        let db = build_database(&[random_frame("a", 5)], &c);
        let (index, mut blob, meta) = encode(&db).unwrap();
        blob[0] ^= 1;
        assert!(matches!(decode(&index, &blob, &meta, &c), Err(Error::Checksum(_))));
        let bumped = String::from_utf8(meta.clone())
            .unwrap()
            .replace("\"version\": 1", "\"version\": 2");
        let (index, blob, _) = encode(&db).unwrap();
        assert!(matches!(
            decode(&index, &blob, bumped.as_bytes(), &c),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn points_outside_their_box_fail_validation_on_load() {
        let c = catalog_min(1);
        let db = build_database(
            &[frame("x", vec![Point::xyz(0.0, 0.0, -0.8)], vec![car(0.0, 0.0, 0.0)])],
            &c,
        );
        let (_, _, _) = encode(&db).unwrap();
        let mut bad = db.clone();
        bad.records.get_mut(&ClassId(0)).unwrap()[0].points.points[0].x = 3.0;
        let (index, blob, meta) = encode(&bad).unwrap();
        assert!(matches!(decode(&index, &blob, &meta, &c), Err(Error::Format { .. })));
    }

    proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(24))]

        #[test]
        fn save_load_save_is_byte_identical(seeds in prop::collection::vec(0u64..1000, 0..4)) {
            let c = catalog_min(1);
            let frames: Vec<_> = seeds.iter().enumerate().map(|(i, s)| random_frame(&format!("{i:06}"), *s)).collect();
            let db = build_database(&frames, &c);
            let first = encode(&db).unwrap();
            let reloaded = decode(&first.0, &first.1, &first.2, &c).unwrap();
            prop_assert_eq!(&reloaded, &db);
            prop_assert!(encode(&reloaded).unwrap() == first);
        }

        #[test]
        fn build_is_frame_order_insensitive(seeds in prop::collection::vec(0u64..1000, 1..5), rot in 0usize..5) {
            let c = catalog_min(3);
            let frames: Vec<_> = seeds.iter().enumerate().map(|(i, s)| random_frame(&format!("{i:06}"), *s)).collect();
            let mut permuted = frames.clone();
            permuted.reverse();
            let len = permuted.len();
            permuted.rotate_left(rot % len);
            prop_assert_eq!(build_database(&frames, &c), build_database(&permuted, &c));
        }
    }
}
