//! Named model slots backed by one JSON file each.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use lattice_core::evaluation::DiagnosticsBundle;
use lattice_core::model::ModelArtifact;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SLOT_FORMAT_VERSION: u32 = 1;

/// What a slot file holds: the model artifact plus bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub format_version: u32,
    pub slot: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    /// Short content hash of the artifact.
    pub model_version: String,
    pub artifact: ModelArtifact,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsBundle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics_error: Option<String>,
}

impl SlotRecord {
    pub fn new(slot: &str, artifact: ModelArtifact, diagnostics: Result<DiagnosticsBundle, String>) -> Self {
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let model_version = model_version(&artifact);
        let (diagnostics, diagnostics_error) = match diagnostics {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e)),
        };
        SlotRecord {
            format_version: SLOT_FORMAT_VERSION,
            slot: slot.to_string(),
            created_at,
            model_version,
            artifact,
            diagnostics,
            diagnostics_error,
        }
    }
}

pub fn model_version(artifact: &ModelArtifact) -> String {
    let text = artifact.to_json().unwrap_or_default();
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Slot names double as file names.
pub fn valid_slot_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug)]
pub struct Registry {
    dir: PathBuf,
    slots: RwLock<BTreeMap<String, Arc<SlotRecord>>>,
    training: Mutex<HashSet<String>>,
}

/// Held while a slot trains; releases the slot on drop.
pub struct TrainingGuard<'a> {
    registry: &'a Registry,
    slot: String,
}

impl Drop for TrainingGuard<'_> {
    fn drop(&mut self) {
        self.registry.training.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.slot);
    }
}

impl Registry {
    /// Opens `dir`, creating it if needed, and loads every slot file in it.
    /// Files that fail to parse are reported and skipped.
    pub fn open(dir: &Path) -> io::Result<(Self, Vec<String>)> {
        fs::create_dir_all(dir)?;
        let mut slots = BTreeMap::new();
        let mut warnings = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            match load_slot(&path) {
                Ok(record) => {
                    slots.insert(record.slot.clone(), Arc::new(record));
                }
                Err(e) => warnings.push(format!("skipping {}: {e}", path.display())),
            }
        }
        let registry = Registry { dir: dir.to_path_buf(), slots: RwLock::new(slots), training: Mutex::default() };
        Ok((registry, warnings))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, slot: &str) -> Option<Arc<SlotRecord>> {
        self.slots.read().unwrap_or_else(|e| e.into_inner()).get(slot).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.slots.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Claims `slot` for training; `None` if another request holds it.
    pub fn begin_training(&self, slot: &str) -> Option<TrainingGuard<'_>> {
        let mut busy = self.training.lock().unwrap_or_else(|e| e.into_inner());
        busy.insert(slot.to_string()).then(|| TrainingGuard { registry: self, slot: slot.to_string() })
    }

    /// Persists the record, then makes it visible to readers.
    pub fn install(&self, record: SlotRecord) -> io::Result<Arc<SlotRecord>> {
        let path = self.dir.join(format!("{}.json", record.slot));
        let tmp = self.dir.join(format!(".{}.json.tmp", record.slot));
        let text = serde_json::to_string_pretty(&record).map_err(io::Error::other)?;
        fs::write(&tmp, text + "\n")?;
        fs::rename(&tmp, &path)?;
        let record = Arc::new(record);
        self.slots.write().unwrap_or_else(|e| e.into_inner()).insert(record.slot.clone(), record.clone());
        Ok(record)
    }
}

fn load_slot(path: &Path) -> Result<SlotRecord, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if value.get("format_version").and_then(serde_json::Value::as_u64) != Some(u64::from(SLOT_FORMAT_VERSION)) {
        return Err("unsupported slot format version".into());
    }
    // re-validate the embedded artifact through its own loader
    let artifact_text = value.get("artifact").map(|a| a.to_string()).ok_or("slot file has no artifact")?;
    ModelArtifact::from_json(&artifact_text).map_err(|e| e.to_string())?;
    let record: SlotRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
    if !valid_slot_name(&record.slot) {
        return Err(format!("invalid slot name '{}'", record.slot));
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lattice_core::dataset::embedded_dataset;
    use lattice_core::model::{train_pipeline, ModelKind, TrainConfig};

    fn record(slot: &str) -> SlotRecord {
        let data = embedded_dataset();
        let out = train_pipeline(&data, ModelKind::Cart, &TrainConfig::default(), 2).unwrap();
        let diag = out.artifact.diagnostics(&data).map_err(|e| e.to_string());
        SlotRecord::new(slot, out.artifact, diag)
    }

    #[test]
    fn slot_names() {
        assert!(valid_slot_name("default"));
        assert!(valid_slot_name("xgb_seed-7"));
        for bad in ["", "../x", "a b", "a/b", &"x".repeat(65)] {
            assert!(!valid_slot_name(bad), "{bad}");
        }
    }

    #[test]
    fn install_persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let (reg, warnings) = Registry::open(dir.path()).unwrap();
        assert!(warnings.is_empty());
        let rec = reg.install(record("a")).unwrap();
        assert_eq!(reg.names(), vec!["a".to_string()]);
        fs::write(dir.path().join("broken.json"), "{").unwrap();
        let (again, warnings) = Registry::open(dir.path()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(*again.get("a").unwrap(), *rec);
    }

    #[test]
    fn training_guard_is_exclusive_per_slot() {
        let dir = tempfile::tempdir().unwrap();
        let (reg, _) = Registry::open(dir.path()).unwrap();
        let g = reg.begin_training("a").unwrap();
        assert!(reg.begin_training("a").is_none());
        assert!(reg.begin_training("b").is_some());
        drop(g);
        assert!(reg.begin_training("a").is_some());
    }

    #[test]
    fn model_version_tracks_content() {
        let a = record("a");
        assert_eq!(a.model_version.len(), 12);
        assert_eq!(model_version(&a.artifact), a.model_version);
        let mut other = a.artifact.clone();
        other.seed += 1;
        assert_ne!(model_version(&other), a.model_version);
    }
}
