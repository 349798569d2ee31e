//! File naming for input datasets and pipeline outputs.
//!
//! Every product type lives in its own directory with frame-indexed file
//! names, e.g. `depth/depth_000012.pfm`.

use std::path::{Path, PathBuf};

use crate::compositor::BlendMode;

fn indexed(dir: &str, stem: &str, index: usize, ext: &str) -> String {
    format!("{dir}/{stem}_{index:06}.{ext}")
}

/// Input dataset: frames, poses, semantic maps and CG layers, plus optional
/// ground truth written by the synthetic generator.
#[derive(Clone, Debug)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn poses(&self) -> PathBuf {
        self.path("poses.json")
    }

    pub fn scene(&self) -> PathBuf {
        self.path("scene.json")
    }

    pub fn frame(&self, i: usize) -> PathBuf {
        self.path(&indexed("frames", "frame", i, "png"))
    }

    pub fn labels(&self, i: usize) -> PathBuf {
        self.path(&indexed("labels", "label", i, "png"))
    }

    pub fn uncertainty(&self, i: usize) -> PathBuf {
        self.path(&indexed("uncertainty", "uncertainty", i, "png"))
    }

    pub fn cg_color(&self, i: usize) -> PathBuf {
        self.path(&indexed("cg", "color", i, "png"))
    }

    pub fn cg_depth(&self, i: usize) -> PathBuf {
        self.path(&indexed("cg", "depth", i, "pfm"))
    }

    pub fn truth_depth(&self, i: usize) -> PathBuf {
        self.path(&indexed("truth", "depth", i, "pfm"))
    }

    /// Exact flow on frame `i`'s grid pointing into frame `i − 1`.
    pub fn truth_flow(&self, i: usize) -> PathBuf {
        self.path(&indexed("truth", "flow", i, "flo"))
    }
}

/// Relative paths of pipeline products.
pub mod product {
    use super::*;

    pub fn flow(i: usize) -> String {
        indexed("flow", "flow", i, "flo")
    }

    pub fn divergence(i: usize) -> String {
        indexed("divergence", "divergence", i, "json")
    }

    pub fn depth(i: usize) -> String {
        indexed("depth", "depth", i, "pfm")
    }

    pub fn fused(i: usize) -> String {
        indexed("fused", "fused", i, "pfm")
    }

    pub fn probability(i: usize) -> String {
        indexed("probability", "probability", i, "pfm")
    }

    pub fn alpha(mode: BlendMode, i: usize) -> String {
        indexed(&format!("alpha/{}", mode.name()), "alpha", i, "pfm")
    }

    pub fn composite(mode: BlendMode, i: usize) -> String {
        indexed(&format!("composite/{}", mode.name()), "frame", i, "png")
    }

    pub fn triptych(i: usize) -> String {
        indexed("compare", "triptych", i, "png")
    }

    /// Intermediate products, stored under the cache directory.
    pub fn is_intermediate(rel: &str) -> bool {
        ["flow/", "divergence/", "depth/", "fused/", "probability/"]
            .iter()
            .any(|p| rel.starts_with(p))
    }
}

/// Output tree. Intermediate products go under `cache`, which defaults to
/// the output root.
#[derive(Clone, Debug)]
pub struct OutputLayout {
    pub root: PathBuf,
    pub cache: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>, cache: Option<&Path>) -> Self {
        let root = root.into();
        let cache = cache.map_or_else(|| root.clone(), Path::to_path_buf);
        Self { root, cache }
    }

    /// Absolute location of a product given its relative name.
    pub fn resolve(&self, rel: &str) -> PathBuf {
        if product::is_intermediate(rel) {
            self.cache.join(rel)
        } else {
            self.root.join(rel)
        }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn compare_table(&self) -> PathBuf {
        self.root.join("compare/metrics.json")
    }
}
