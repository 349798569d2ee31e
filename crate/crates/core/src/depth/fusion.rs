use crate::error::{check_dims, Error, Result};
use crate::flow::{warp_scalar_field, FlowField};
use crate::image::{DepthMap, ScalarMap};

/// Averages the last `N` depth maps on the grid of the newest frame.
///
/// `history` is ordered oldest first; entry `j` holds the depth of frame `j`
/// and the backward flow from frame `j` to frame `j − 1`. Each older map is
/// carried forward by chaining warps along the newer flows (the flow of the
/// oldest entry is not needed). The output is the per-pixel mean of the
/// valid warped samples and is invalid where there are none.
pub fn fuse_depth_temporal(history: &[(DepthMap, FlowField)]) -> Result<DepthMap> {
    let Some((newest, _)) = history.last() else {
        return Err(Error::EmptyHistory);
    };
    let dims = newest.dims();
    for (d, f) in history {
        check_dims(dims, d.dims())?;
        check_dims(dims, f.dims())?;
    }

    let mut carried: Vec<ScalarMap> = Vec::with_capacity(history.len());
    for (depth, flow) in history {
        for m in carried.iter_mut() {
            *m = warp_scalar_field(m, flow)?;
        }
        carried.push(depth.0.clone());
    }

    let (w, h) = dims;
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for i in 0..w * h {
        let mut sum = 0.0;
        let mut n = 0usize;
        for m in &carried {
            if m.valid[i] {
                sum += m.values[i];
                n += 1;
            }
        }
        if n > 0 {
            values[i] = sum / n as f64;
            valid[i] = true;
        }
    }
    Ok(DepthMap::from_scalar(ScalarMap::new(w, h, values, valid)?))
}
