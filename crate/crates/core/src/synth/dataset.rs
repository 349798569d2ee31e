use std::path::Path;

use super::{ground_truth_flow, make_cg_layer, render_scene, SceneSpec};
use crate::error::Result;
use crate::io::{self, poses::PoseManifest};
use crate::pipeline::DatasetLayout;

/// Renders every frame of `spec` into a dataset directory the pipeline can
/// consume, including ground-truth depth and backward flow.
pub fn write_dataset(spec: &SceneSpec, root: &Path) -> Result<DatasetLayout> {
    spec.validate()?;
    let layout = DatasetLayout::new(root);
    io::write_bytes(&layout.scene(), spec.to_json()?.as_bytes())?;
    io::poses::write(
        &layout.poses(),
        &PoseManifest::new(spec.camera_path.clone()),
    )?;
    for rec in &spec.camera_path {
        let i = rec.index;
        let pos = spec
            .camera_path
            .iter()
            .position(|r| r.index == i)
            .expect("index comes from the path");
        let r = render_scene(spec, pos)?;
        io::png::write_frame(&layout.frame(i), &r.frame)?;
        io::labels::write_semantic_map(&layout.labels(i), &layout.uncertainty(i), &r.semantics)?;
        io::pfm::write_depth(&layout.truth_depth(i), &r.depth)?;
        let cg = make_cg_layer(spec, pos)?;
        io::png::write_cg_layer(&layout.cg_color(i), &layout.cg_depth(i), &cg)?;
        if pos > 0 && spec.camera_path[pos - 1].index + 1 == i {
            io::flo::write(
                &layout.truth_flow(i),
                &ground_truth_flow(spec, pos, pos - 1)?,
            )?;
        }
    }
    Ok(layout)
}
