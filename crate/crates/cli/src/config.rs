//! Project configuration file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lidar_rebalance::balance::{DwaConfig, SyntheticLosses};
use lidar_rebalance::catalog::{CatalogSpec, ClassSpec};
use lidar_rebalance::error::Position;
use lidar_rebalance::ingest::UnknownClassPolicy;
use lidar_rebalance::sampler::{ProposalMode, SamplerConfig};
use lidar_rebalance::synthetic::SyntheticConfig;
use lidar_rebalance::{ClassCatalog, Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    /// Worker threads; 0 uses one per core.
    #[serde(default)]
    threads: usize,
    dataset: RawDataset,
    #[serde(default)]
    catalog: RawCatalog,
    #[serde(default)]
    sampler: SamplerConfig,
    #[serde(default)]
    dwa: RawDwa,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    root: PathBuf,
    /// File listing the frame ids to use, one per line.
    split: Option<PathBuf>,
    #[serde(default)]
    unknown_classes: UnknownClassPolicy,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    preset: Option<String>,
    #[serde(default)]
    classes: Vec<ClassSpec>,
    /// Per-class target overrides by name.
    #[serde(default)]
    targets: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDwa {
    temperature: f64,
    window: usize,
    losses: Option<PathBuf>,
    synthetic: Option<SyntheticLosses>,
}

impl Default for RawDwa {
    fn default() -> Self {
        let d = DwaConfig::<f64>::default();
        Self {
            temperature: d.temperature,
            window: d.window,
            losses: None,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    database: Option<PathBuf>,
}

/// Where `dwa-sim` gets its losses.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSource {
    Csv(PathBuf),
    Synthetic(SyntheticLosses),
}

/// Validated configuration with paths resolved against the config file's directory.
#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub seed: u64,
    pub threads: usize,
    pub dataset_root: PathBuf,
    pub split: Option<PathBuf>,
    pub unknown_classes: UnknownClassPolicy,
    pub catalog: ClassCatalog,
    pub sampler: SamplerConfig,
    pub dwa: DwaConfig,
    pub losses: Option<LossSource>,
    pub output_dir: PathBuf,
    pub database_dir: PathBuf,
    pub synthetic: SyntheticConfig,
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<ModeOverride>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeOverride {
    KeepDonorPose,
    OccupancySample,
    /// Keep donor poses and skip the semantic filter.
    Conventional,
}

impl std::str::FromStr for ModeOverride {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "keep-donor-pose" => Ok(Self::KeepDonorPose),
            "occupancy-sample" => Ok(Self::OccupancySample),
            "conventional" => Ok(Self::Conventional),
            other => Err(format!(
                "unknown mode `{other}` (expected keep-donor-pose, occupancy-sample or conventional)"
            )),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build_catalog(raw: RawCatalog) -> Result<ClassCatalog> {
    let base = if !raw.classes.is_empty() {
        if raw.preset.is_some() {
            return Err(Error::Config(
                "give either catalog.preset or catalog.classes, not both".into(),
            ));
        }
        ClassCatalog::from_spec(CatalogSpec { classes: raw.classes })?
    } else {
        match raw.preset.as_deref().unwrap_or("kitti") {
            "kitti" => ClassCatalog::kitti(),
            "nuscenes" => ClassCatalog::nuscenes(),
            other => return Err(Error::Config(format!("unknown catalog preset `{other}`"))),
        }
    };
    if raw.targets.is_empty() {
        return Ok(base);
    }
    let mut overrides = BTreeMap::new();
    for (name, target) in &raw.targets {
        overrides.insert(base.require_id(name)?, *target);
    }
    base.with_targets(|id, _| {
        overrides
            .get(&id)
            .copied()
            .unwrap_or_else(|| base.target(id).expect("catalog id"))
    })
}

impl ProjectConfig {
    /// Parses TOML text; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let position = e
                .span()
                .map(|s| Position::Line(text[..s.start].matches('\n').count() + 1))
                .unwrap_or(Position::Unknown);
            Error::format(position, e.message().to_string())
        })?;
        let catalog = build_catalog(raw.catalog)?;
        raw.sampler.validate()?;
        let dwa = DwaConfig::new(raw.dwa.temperature, raw.dwa.window)?;
        let losses = match (raw.dwa.losses, raw.dwa.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either dwa.losses or dwa.synthetic, not both".into(),
                ));
            }
            (Some(p), None) => Some(LossSource::Csv(resolve(base, &p))),
            (None, Some(s)) => {
                for h in &s.heads {
                    catalog.require_id(&h.class)?;
                }
                Some(LossSource::Synthetic(s))
            }
            (None, None) => None,
        };
        for share in &raw.synthetic.mix {
            catalog.require_id(&share.class)?;
        }
        let output_dir = resolve(base, &raw.output.dir.unwrap_or_else(|| PathBuf::from("out")));
        let database_dir = raw.output.database.map(|p| resolve(base, &p));
        Ok(Self {
            seed: raw.seed,
            threads: raw.threads,
            dataset_root: resolve(base, &raw.dataset.root),
            split: raw.dataset.split.map(|p| resolve(base, &p)),
            unknown_classes: raw.dataset.unknown_classes,
            catalog,
            sampler: raw.sampler,
            dwa,
            losses,
            database_dir: database_dir.unwrap_or_else(|| output_dir.join("gtdb")),
            output_dir,
            synthetic: raw.synthetic,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        match o.mode {
            None => {}
            Some(ModeOverride::KeepDonorPose) => self.sampler.mode = ProposalMode::KeepDonorPose,
            Some(ModeOverride::OccupancySample) => self.sampler.mode = ProposalMode::OccupancySample,
            Some(ModeOverride::Conventional) => {
                self.sampler.mode = ProposalMode::KeepDonorPose;
                self.sampler.contextual = false;
            }
        }
        if let Some(out) = &o.out {
            let default_db = self.database_dir == self.output_dir.join("gtdb");
            self.output_dir = out.clone();
            if default_db {
                self.database_dir = out.join("gtdb");
            }
        }
    }

    pub fn augmented_dir(&self) -> PathBuf {
        self.output_dir.join("augmented")
    }
}
