use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::properties::PropertyVector;
use crate::search_space::Architecture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub arch: Architecture,
    pub perf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub dataset: String,
    pub properties: PropertyVector,
    pub observed: Vec<Observation>,
}

/// Datasets designed so far, with their properties and measured architectures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelfEvalBank {
    pub entries: Vec<BankEntry>,
}

impl SelfEvalBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, dataset: &str) -> Option<&BankEntry> {
        self.entries.iter().find(|e| e.dataset == dataset)
    }

    /// Creates or extends the entry for `dataset`. Properties are overwritten and
    /// observations appended.
    pub fn upsert(&mut self, dataset: &str, props: PropertyVector, obs: Vec<Observation>) -> Result<()> {
        if let Some(o) = obs.iter().find(|o| !(0.0..=1.0).contains(&o.perf)) {
            return Err(Error::InvalidInput(format!("observed perf {} outside [0, 1]", o.perf)));
        }
        match self.entries.iter_mut().find(|e| e.dataset == dataset) {
            Some(e) => {
                e.properties = props;
                e.observed.extend(obs);
            }
            None => self.entries.push(BankEntry { dataset: dataset.to_string(), properties: props, observed: obs }),
        }
        Ok(())
    }

    /// Reads `path`; a missing file is an empty bank.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("bank serializes") + "\n";
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

fn lock_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".lock");
    PathBuf::from(p)
}

/// Load, upsert and persist under an exclusive lock on `<path>.lock`.
pub fn upsert_self_eval(
    path: impl AsRef<Path>,
    dataset: &str,
    props: PropertyVector,
    obs: Vec<Observation>,
) -> Result<SelfEvalBank> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let lp = lock_path(path);
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lp)
        .map_err(|e| Error::io(&lp, e))?;
    lock.lock().map_err(|e| Error::io(&lp, e))?;
    let mut bank = SelfEvalBank::load(path)?;
    bank.upsert(dataset, props, obs)?;
    bank.save(path)?;
    lock.unlock().map_err(|e| Error::io(&lp, e))?;
    Ok(bank)
}
