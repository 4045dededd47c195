//! File-backed decomposition cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vlreward_core::decompose::{DecompositionStore, SubgoalDecomposition};
use vlreward_core::Error;

use crate::error::{LabError, LabResult};
use crate::fixtures::{parse_decompositions, write_decompositions};

/// Decompositions kept in memory and, when backed by a file, written back
/// after every insertion (whole file, via a temporary and a rename).
#[derive(Debug, Clone, Default)]
pub struct JsonlStore {
    path: Option<PathBuf>,
    entries: BTreeMap<String, SubgoalDecomposition>,
}

impl JsonlStore {
    pub fn in_memory(text: &str) -> LabResult<Self> {
        Ok(JsonlStore { path: None, entries: parse_decompositions(text)? })
    }

    /// Opens `path`; a missing file is an empty cache.
    pub fn open(path: &Path) -> LabResult<Self> {
        let entries = match std::fs::read_to_string(path) {
            Ok(text) => parse_decompositions(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(LabError::io(path, e)),
        };
        Ok(JsonlStore { path: Some(path.to_path_buf()), entries })
    }

    pub fn entries(&self) -> impl Iterator<Item = &SubgoalDecomposition> {
        self.entries.values()
    }

    pub fn to_text(&self) -> String {
        write_decompositions(self.entries.values())
    }

    fn flush(&self) -> LabResult<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        }
        let tmp = path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, self.to_text()).map_err(|e| LabError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
    }
}

impl DecompositionStore for JsonlStore {
    fn get(&self, task: &str) -> Option<SubgoalDecomposition> {
        self.entries.get(task).cloned()
    }

    fn put(&mut self, dec: SubgoalDecomposition) -> vlreward_core::Result<()> {
        self.entries.insert(dec.task.clone(), dec);
        self.flush().map_err(|e| Error::Transport(format!("cache write failed: {e}")))
    }
}
