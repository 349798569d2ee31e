//! File formats: PFM scalar maps, Middlebury flow, pose manifests, label and
//! uncertainty maps, and sRGB PNG frames.

pub mod flo;
pub mod labels;
pub mod pfm;
pub mod png;
pub mod poses;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a whole file; a missing file is reported as a missing input.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes a file, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
