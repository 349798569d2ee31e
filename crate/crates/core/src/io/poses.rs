//! Pose manifests: JSON lists of world-from-camera poses with `(w, x, y, z)`
//! quaternions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::sphere::CameraPose;

pub const POSE_MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub index: usize,
    pub position: [f64; 3],
    /// Unit quaternion as `[w, x, y, z]`.
    pub quaternion: [f64; 4],
}

impl PoseRecord {
    pub fn from_pose(index: usize, pose: &CameraPose) -> Self {
        Self {
            index,
            position: pose.position.into(),
            quaternion: pose.quaternion_wxyz(),
        }
    }

    pub fn to_pose(&self) -> Result<CameraPose> {
        CameraPose::from_raw(self.position, self.quaternion)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseManifest {
    pub version: u32,
    pub poses: Vec<PoseRecord>,
}

impl PoseManifest {
    pub fn new(poses: Vec<PoseRecord>) -> Self {
        Self {
            version: POSE_MANIFEST_VERSION,
            poses,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != POSE_MANIFEST_VERSION {
            return Err(Error::format(
                "pose manifest",
                format!("unsupported version {}", self.version),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.poses {
            if !seen.insert(r.index) {
                return Err(Error::format(
                    "pose manifest",
                    format!("duplicate index {}", r.index),
                ));
            }
            r.to_pose()?;
        }
        Ok(())
    }

    /// Pose for frame `index`, if listed.
    pub fn get(&self, index: usize) -> Option<CameraPose> {
        self.poses
            .iter()
            .find(|r| r.index == index)
            .and_then(|r| r.to_pose().ok())
    }
}

pub fn read(path: &Path) -> Result<PoseManifest> {
    let bytes = read_bytes(path)?;
    let m: PoseManifest = serde_json::from_slice(&bytes)?;
    m.validate()?;
    Ok(m)
}

pub fn write(path: &Path, manifest: &PoseManifest) -> Result<()> {
    write_bytes(path, serde_json::to_string_pretty(manifest)?.as_bytes())
}
