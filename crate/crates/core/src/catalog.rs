//! Object classes, their per-frame sampling targets, and the semantic regions
//! each class may be placed on.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::ClassId;

pub const DEFAULT_MIN_POINTS: u32 = 5;

fn default_min_points() -> u32 {
    DEFAULT_MIN_POINTS
}

/// Matching key for semantic and class names: trimmed, lowercased.
pub fn normalize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

/// One class as written in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    #[serde(default)]
    pub target: u32,
    #[serde(default)]
    pub associations: Vec<String>,
    #[serde(default = "default_min_points")]
    pub min_points: u32,
}

/// Serialized form of a [`ClassCatalog`]. Class ids follow list order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub classes: Vec<ClassSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ClassEntry {
    name: String,
    target: u32,
    associations: BTreeSet<String>,
    normalized: BTreeSet<String>,
    min_points: u32,
}

/// Validated, immutable class catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    entries: Vec<ClassEntry>,
    by_name: HashMap<String, ClassId>,
}

impl ClassCatalog {
    pub fn from_spec(spec: CatalogSpec) -> Result<Self> {
        if spec.classes.len() > usize::from(u16::MAX) {
            return Err(Error::Config("too many classes".into()));
        }
        let mut entries = Vec::with_capacity(spec.classes.len());
        let mut by_name = HashMap::new();
        for (i, class) in spec.classes.into_iter().enumerate() {
            let key = normalize_name(&class.name);
            if key.is_empty() {
                return Err(Error::Config(format!("class #{i} has an empty name")));
            }
            if by_name.insert(key, ClassId(i as u16)).is_some() {
                return Err(Error::Config(format!("duplicate class name `{}`", class.name)));
            }
            let associations: BTreeSet<String> = class
                .associations
                .iter()
                .map(|a| a.trim().to_string())
                .filter(|a| !a.is_empty())
                .collect();
            if class.target > 0 && associations.is_empty() {
                return Err(Error::Config(format!(
                    "class `{}` has target {} but no associated semantic labels",
                    class.name, class.target
                )));
            }
            let normalized = associations.iter().map(|a| normalize_name(a)).collect();
            entries.push(ClassEntry {
                name: class.name.trim().to_string(),
                target: class.target,
                associations,
                normalized,
                min_points: class.min_points,
            });
        }
        Ok(Self { entries, by_name })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: CatalogSpec = toml::from_str(text).map_err(|e| Error::Config(format!("catalog: {e}")))?;
        Self::from_spec(spec)
    }

    pub fn to_spec(&self) -> CatalogSpec {
        CatalogSpec {
            classes: self
                .entries
                .iter()
                .map(|e| ClassSpec {
                    name: e.name.clone(),
                    target: e.target,
                    associations: e.associations.iter().cloned().collect(),
                    min_points: e.min_points,
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_spec()).expect("catalog spec serializes")
    }

    /// SHA-256 of the canonical serialized form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// KITTI car / pedestrian / cyclist with KITTI-lineage sampling targets.
    pub fn kitti() -> Self {
        let class = |name: &str, target, assoc: &[&str]| ClassSpec {
            name: name.into(),
            target,
            associations: assoc.iter().map(|s| s.to_string()).collect(),
            min_points: DEFAULT_MIN_POINTS,
        };
        Self::from_spec(CatalogSpec {
            classes: vec![
                class("Car", 15, &["road"]),
                class("Pedestrian", 10, &["sidewalk"]),
                class("Cyclist", 10, &["sidewalk", "road"]),
            ],
        })
        .expect("builtin catalog is valid")
    }

    /// The ten nuScenes detection classes.
    pub fn nuscenes() -> Self {
        const DRIVABLE: &[&str] = &["drivable surface"];
        const BOTH: &[&str] = &["sidewalk", "drivable surface"];
        let table: [(&str, u32, &[&str]); 10] = [
            ("car", 2, DRIVABLE),
            ("truck", 3, DRIVABLE),
            ("construction_vehicle", 7, DRIVABLE),
            ("bus", 4, DRIVABLE),
            ("trailer", 6, DRIVABLE),
            ("barrier", 2, BOTH),
            ("motorcycle", 6, BOTH),
            ("bicycle", 6, BOTH),
            ("pedestrian", 2, &["sidewalk"]),
            ("traffic_cone", 2, BOTH),
        ];
        Self::from_spec(CatalogSpec {
            classes: table
                .iter()
                .map(|(name, target, assoc)| ClassSpec {
                    name: name.to_string(),
                    target: *target,
                    associations: assoc.iter().map(|s| s.to_string()).collect(),
                    min_points: DEFAULT_MIN_POINTS,
                })
                .collect(),
        })
        .expect("builtin catalog is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.entries.len()).map(|i| ClassId(i as u16))
    }

    fn entry(&self, id: ClassId) -> Result<&ClassEntry> {
        self.entries
            .get(id.index())
            .ok_or_else(|| Error::Lookup(format!("unknown class id {id}")))
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.index() < self.entries.len()
    }

    /// Case-insensitive class lookup by name.
    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(&normalize_name(name)).copied()
    }

    pub fn require_id(&self, name: &str) -> Result<ClassId> {
        self.id_of(name)
            .ok_or_else(|| Error::Lookup(format!("unknown class `{name}`")))
    }

    pub fn name(&self, id: ClassId) -> Result<&str> {
        self.entry(id).map(|e| e.name.as_str())
    }

    pub fn target(&self, id: ClassId) -> Result<u32> {
        self.entry(id).map(|e| e.target)
    }

    pub fn min_points(&self, id: ClassId) -> Result<u32> {
        self.entry(id).map(|e| e.min_points)
    }

    /// The configured semantic labels a class may be placed on.
    pub fn associated_labels(&self, id: ClassId) -> Result<&BTreeSet<String>> {
        self.entry(id).map(|e| &e.associations)
    }

    /// Whether `label` (matched case-insensitively) is associated with the class.
    pub fn is_associated(&self, id: ClassId, label: &str) -> Result<bool> {
        self.entry(id).map(|e| e.normalized.contains(&normalize_name(label)))
    }

    /// Copy of this catalog with every sampling target replaced.
    pub fn with_targets(&self, targets: impl Fn(ClassId, &str) -> u32) -> Result<Self> {
        let mut spec = self.to_spec();
        for (i, c) in spec.classes.iter_mut().enumerate() {
            c.target = targets(ClassId(i as u16), &c.name);
        }
        Self::from_spec(spec)
    }
}
