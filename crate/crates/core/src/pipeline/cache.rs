//! Content-addressed product cache.
//!
//! Each product is recorded in the manifest with the key of everything it
//! was computed from and the SHA-256 of its bytes. A product is reused only
//! when both still match.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layout::OutputLayout;
use crate::error::Result;
use crate::io::{read_bytes, write_bytes};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Incremental cache key builder.
#[derive(Clone)]
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        Self(h)
    }

    pub fn part(mut self, s: impl AsRef<[u8]>) -> Self {
        let s = s.as_ref();
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s);
        self
    }

    pub fn json<T: Serialize>(self, value: &T) -> Self {
        let s = serde_json::to_string(value).expect("plain data serializes");
        self.part(s)
    }

    pub fn finish(self) -> String {
        self.0
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub key: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub products: BTreeMap<String, ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            products: BTreeMap::new(),
        }
    }
}

impl Manifest {
    /// Loads a manifest, or starts a fresh one if it is missing or stale.
    pub fn load_or_default(path: &Path) -> Self {
        let Ok(bytes) = std::fs::read(path) else {
            return Self::default();
        };
        match serde_json::from_slice::<Manifest>(&bytes) {
            Ok(m) if m.schema_version == MANIFEST_SCHEMA_VERSION => m,
            _ => {
                log::warn!("ignoring unreadable manifest {}", path.display());
                Self::default()
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Read side of the cache for one run plus the entries it produced.
pub struct Cache<'a> {
    pub layout: &'a OutputLayout,
    pub previous: &'a Manifest,
    pub enabled: bool,
}

impl Cache<'_> {
    /// Bytes of `rel` if a product with `key` is on disk and intact.
    pub fn lookup(&self, rel: &str, key: &str) -> Option<Vec<u8>> {
        if !self.enabled {
            return None;
        }
        let entry = self.previous.products.get(rel)?;
        if entry.key != key {
            return None;
        }
        let bytes = read_bytes(&self.layout.resolve(rel)).ok()?;
        (sha256_hex(&bytes) == entry.sha256).then_some(bytes)
    }

    pub fn store(&self, rel: &str, key: &str, bytes: &[u8]) -> Result<(String, ManifestEntry)> {
        write_bytes(&self.layout.resolve(rel), bytes)?;
        Ok((
            rel.to_string(),
            ManifestEntry {
                key: key.to_string(),
                sha256: sha256_hex(bytes),
            },
        ))
    }

    /// Returns cached bytes for `rel` or produces, stores and returns them.
    ///
    /// The flag tells whether the cache was hit.
    pub fn get_or_store(
        &self,
        rel: &str,
        key: &str,
        produce: impl FnOnce() -> Result<Vec<u8>>,
        entries: &mut Vec<(String, ManifestEntry)>,
    ) -> Result<(Vec<u8>, bool)> {
        if let Some(bytes) = self.lookup(rel, key) {
            entries.push((
                rel.to_string(),
                ManifestEntry {
                    key: key.to_string(),
                    sha256: sha256_hex(&bytes),
                },
            ));
            return Ok((bytes, true));
        }
        let bytes = produce()?;
        entries.push(self.store(rel, key, &bytes)?);
        Ok((bytes, false))
    }
}
