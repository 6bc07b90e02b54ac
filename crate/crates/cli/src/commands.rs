use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use lidar_rebalance::balance::{read_loss_csv, run_trajectory, LossSnapshot, WeightTrajectory};
use lidar_rebalance::gtdb::{self, DatabaseBuilder, GtDatabase};
use lidar_rebalance::ingest::{
    dataset_stats, format_label_line, parse_labels, write_point_cloud, ClassStats, DatasetLayout, FrameBundle,
    CALIB_DIR, LABEL_DIR, VELODYNE_DIR,
};
use lidar_rebalance::sampler::{augment_frame, frame_rng, ClassAudit, FrameAudit};
use lidar_rebalance::synthetic::{synthetic_corpus, write_corpus};
use lidar_rebalance::{Error, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LossSource, ProjectConfig};

/// Frames loaded at once by the streaming commands.
const CHUNK: usize = 64;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Validation(e.to_string()))
}

fn with_pool<T: Send>(cfg: &ProjectConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// Frame ids from the split file when one is configured, else every labeled frame.
pub fn frame_ids(cfg: &ProjectConfig, layout: &DatasetLayout) -> Result<Vec<String>> {
    let Some(split) = &cfg.split else {
        return layout.frame_ids();
    };
    let text = fs::read_to_string(split).map_err(|e| Error::io(split, e))?;
    let mut ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    ids.sort();
    ids.dedup();
    Ok(ids)
}

/// Sibling path used while a directory is being written.
fn partial_dir(dir: &Path) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    dir.with_file_name(format!(".{name}.partial"))
}

/// Writes a directory through a partial sibling and swaps it into place;
/// the partial directory is removed on failure.
fn write_dir_atomically<T>(dir: &Path, fill: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let partial = partial_dir(dir);
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    }
    fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    let out = match fill(&partial) {
        Ok(v) => v,
        Err(e) => {
            let _ = fs::remove_dir_all(&partial);
            return Err(e);
        }
    };
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&partial, dir).map_err(|e| Error::io(dir, e))?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StatsReport {
    pub frames: usize,
    pub stats: ClassStats,
    pub csv_path: PathBuf,
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} frames", self.frames)?;
        writeln!(f, "{}", self.stats)
    }
}

/// Per-class object counts over the dataset's labels.
pub fn cmd_stats(cfg: &ProjectConfig) -> Result<StatsReport> {
    let layout = DatasetLayout::new(&cfg.dataset_root);
    let ids = frame_ids(cfg, &layout)?;
    let boxes = with_pool(cfg, || {
        ids.par_iter()
            .map(|id| {
                let calib = layout.read_calibration_or_identity(id)?;
                let text = layout.read_label_text(id)?;
                parse_labels(&text, &calib, &cfg.catalog, cfg.unknown_classes)
                    .map(|p| p.boxes)
                    .map_err(|e| match e {
                        Error::Format { position, message } => Error::Format {
                            position,
                            message: format!("{}: {message}", layout.label_path(id).display()),
                        },
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let stats = dataset_stats(boxes.iter().map(Vec::as_slice), &cfg.catalog)?;
    let csv_path = cfg.output_dir.join("stats.csv");
    write_file(&csv_path, stats.to_csv().as_bytes())?;
    Ok(StatsReport {
        frames: ids.len(),
        stats,
        csv_path,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    pub frames: usize,
    pub records: usize,
    pub counts: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, usize>,
    pub path: PathBuf,
}

impl fmt::Display for BuildSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "database {} ({} records from {} frames)",
            self.path.display(),
            self.records,
            self.frames
        )?;
        writeln!(f, "{:<20} {:>8} {:>8}", "class", "records", "skipped")?;
        for (name, n) in &self.counts {
            writeln!(
                f,
                "{name:<20} {n:>8} {:>8}",
                self.skipped.get(name).copied().unwrap_or(0)
            )?;
        }
        Ok(())
    }
}

/// Extracts every labeled object into the database directory.
pub fn cmd_build_db(cfg: &ProjectConfig) -> Result<BuildSummary> {
    let layout = DatasetLayout::new(&cfg.dataset_root);
    let ids = frame_ids(cfg, &layout)?;
    let db = with_pool(cfg, || {
        let mut builder = DatabaseBuilder::new(&cfg.catalog);
        for chunk in ids.chunks(CHUNK) {
            let extracted = chunk
                .par_iter()
                .map(|id| {
                    let frame = layout.load_frame_without_semantics(id, &cfg.catalog, cfg.unknown_classes)?;
                    Ok((id, gtdb::extract_records(&frame, &cfg.catalog)))
                })
                .collect::<Result<Vec<_>>>()?;
            for (id, (records, skipped)) in extracted {
                builder.add_extracted(id, records, skipped);
            }
        }
        Ok(builder.finish())
    })?;
    write_dir_atomically(&cfg.database_dir, |dir| gtdb::save(&db, dir))?;
    let names = db.class_names();
    Ok(BuildSummary {
        frames: db.frames(),
        records: db.len(),
        counts: db.counts().iter().map(|(c, n)| (names[c].clone(), *n)).collect(),
        skipped: db.skipped().iter().map(|(c, n)| (names[c].clone(), *n)).collect(),
        path: cfg.database_dir.clone(),
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AugmentSummary {
    pub seed: u64,
    pub mode: String,
    pub contextual: bool,
    pub frames: usize,
    pub augmented: usize,
    /// Frames passed through unchanged for lack of semantics.
    pub skipped_no_semantics: usize,
    pub inserted: usize,
    pub classes: BTreeMap<String, ClassAudit>,
    #[serde(skip)]
    pub path: PathBuf,
}

impl fmt::Display for AugmentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "augmented {} of {} frames into {} ({} objects inserted, {} frames without semantics skipped)",
            self.augmented,
            self.frames,
            self.path.display(),
            self.inserted,
            self.skipped_no_semantics
        )?;
        writeln!(
            f,
            "{:<20} {:>6} {:>9} {:>8} {:>10} {:>9} {:>8} {:>13}",
            "class", "drawn", "proposed", "accepted", "non-assoc", "collision", "off-map", "behind-camera"
        )?;
        for (name, a) in &self.classes {
            let r = |k| a.rejections.get(&k).copied().unwrap_or(0);
            use lidar_rebalance::sampler::RejectReason::*;
            writeln!(
                f,
                "{name:<20} {:>6} {:>9} {:>8} {:>10} {:>9} {:>8} {:>13}",
                a.drawn,
                a.proposals,
                a.accepted,
                r(NonAssociatedRegion),
                r(Collision),
                r(OffMap),
                r(BehindCamera)
            )?;
        }
        Ok(())
    }
}

enum FrameOutcome {
    Augmented(Box<FrameAudit>),
    Skipped,
}

fn augment_one(
    cfg: &ProjectConfig,
    layout: &DatasetLayout,
    db: &GtDatabase,
    id: &str,
    out: &Path,
) -> Result<FrameOutcome> {
    let mut frame: FrameBundle = if cfg.sampler.contextual {
        layout.load_frame(id, &cfg.catalog, cfg.unknown_classes)?
    } else {
        layout.load_frame_without_semantics(id, &cfg.catalog, cfg.unknown_classes)?
    };
    let label_text = layout.read_label_text(id)?;
    let calib_path = layout.calib_path(id);
    let calib_bytes = fs::read(&calib_path).map_err(|e| Error::io(&calib_path, e))?;
    write_file(&out.join(CALIB_DIR).join(format!("{id}.txt")), &calib_bytes)?;
    let audit_path = out.join("audit").join(format!("{id}.json"));

    if cfg.sampler.contextual && !frame.has_semantics() {
        warn!("frame {id}: no semantic source, passed through unchanged");
        write_file(
            &out.join(VELODYNE_DIR).join(format!("{id}.bin")),
            &write_point_cloud(&frame.cloud),
        )?;
        write_file(&out.join(LABEL_DIR).join(format!("{id}.txt")), label_text.as_bytes())?;
        let note = serde_json::json!({ "frame_id": id, "skipped": "no semantic source" });
        write_file(&audit_path, to_json(&note)?.as_bytes())?;
        return Ok(FrameOutcome::Skipped);
    }

    let mut rng = frame_rng(cfg.seed, id);
    let augmented = augment_frame(&frame, db, &cfg.catalog, &cfg.sampler, &mut rng)?;
    frame.semantic = None;

    let mut labels = label_text;
    if !augmented.inserted.is_empty() && !labels.is_empty() && !labels.ends_with('\n') {
        labels.push('\n');
    }
    for b in augmented.inserted_boxes() {
        labels.push_str(&format_label_line(b, cfg.catalog.name(b.class_id)?, &frame.calib));
        labels.push('\n');
    }
    write_file(
        &out.join(VELODYNE_DIR).join(format!("{id}.bin")),
        &write_point_cloud(&augmented.cloud),
    )?;
    write_file(&out.join(LABEL_DIR).join(format!("{id}.txt")), labels.as_bytes())?;
    write_file(&audit_path, augmented.audit.to_json()?.as_bytes())?;
    Ok(FrameOutcome::Augmented(Box::new(augmented.audit)))
}

/// Augments every frame with database objects and writes the result in
/// dataset layout plus per-frame audits.
pub fn cmd_augment(cfg: &ProjectConfig) -> Result<AugmentSummary> {
    let db = gtdb::load(&cfg.database_dir, &cfg.catalog)?;
    let layout = DatasetLayout::new(&cfg.dataset_root);
    let ids = frame_ids(cfg, &layout)?;
    let dir = cfg.augmented_dir();
    if dir == cfg.dataset_root {
        return Err(Error::Config(
            "output directory must differ from the dataset root".into(),
        ));
    }
    let mut summary = AugmentSummary {
        seed: cfg.seed,
        mode: cfg.sampler.mode.to_string(),
        contextual: cfg.sampler.contextual,
        frames: ids.len(),
        path: dir.clone(),
        ..AugmentSummary::default()
    };
    write_dir_atomically(&dir, |out| {
        fs::create_dir_all(out.join(LABEL_DIR)).map_err(|e| Error::io(out, e))?;
        let outcomes = with_pool(cfg, || {
            ids.par_iter()
                .map(|id| augment_one(cfg, &layout, &db, id, out))
                .collect::<Result<Vec<_>>>()
        })?;
        for outcome in outcomes {
            match outcome {
                FrameOutcome::Skipped => summary.skipped_no_semantics += 1,
                FrameOutcome::Augmented(audit) => {
                    summary.augmented += 1;
                    for (name, a) in &audit.classes {
                        summary.inserted += a.accepted;
                        summary.classes.entry(name.clone()).or_default().merge(a);
                    }
                }
            }
        }
        write_file(&out.join("audit_summary.json"), to_json(&summary)?.as_bytes())
    })?;
    info!("augmented {} frames", summary.augmented);
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct DwaReport {
    pub trajectory: WeightTrajectory,
    pub csv_path: PathBuf,
    pub final_weights: Vec<(String, f64)>,
}

impl fmt::Display for DwaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} weight vectors written to {}",
            self.trajectory.len(),
            self.csv_path.display()
        )?;
        writeln!(f, "final weights:")?;
        for (name, a) in &self.final_weights {
            writeln!(f, "  {name:<20} {a:.6}")?;
        }
        Ok(())
    }
}

/// Runs the DWA scheduler over recorded or generated losses.
pub fn cmd_dwa_sim(cfg: &ProjectConfig) -> Result<DwaReport> {
    let stream: Vec<LossSnapshot> = match &cfg.losses {
        None => return Err(Error::Config("dwa-sim needs dwa.losses or [dwa.synthetic]".into())),
        Some(LossSource::Csv(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            read_loss_csv(&text, &cfg.catalog).map_err(|e| match e {
                Error::Format { position, message } => Error::Format {
                    position,
                    message: format!("{}: {message}", path.display()),
                },
                other => other,
            })?
        }
        Some(LossSource::Synthetic(gen)) => gen.generate(&cfg.catalog)?,
    };
    let heads: Vec<_> = stream
        .first()
        .ok_or_else(|| Error::Validation("loss stream is empty".into()))?
        .heads
        .keys()
        .copied()
        .collect();
    let trajectory = run_trajectory(stream, heads, cfg.dwa, Default::default())?;
    let csv_path = cfg.output_dir.join("dwa_trajectory.csv");
    write_file(&csv_path, trajectory.to_csv(&cfg.catalog)?.as_bytes())?;
    let final_weights = trajectory
        .last()
        .map(|v| {
            v.alpha
                .iter()
                .map(|(id, a)| Ok((cfg.catalog.name(*id)?.to_string(), *a)))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?
        .unwrap_or_default();
    Ok(DwaReport {
        trajectory,
        csv_path,
        final_weights,
    })
}

/// Writes the synthetic street corpus into the dataset root.
pub fn cmd_synth(cfg: &ProjectConfig) -> Result<usize> {
    let frames = synthetic_corpus(&cfg.synthetic, &cfg.catalog)?;
    write_corpus(&frames, &cfg.catalog, &cfg.dataset_root)?;
    Ok(frames.len())
}
