use crate::error::{check_dims, Error, Result};
use crate::image::{DepthMap, ProbabilityMap};
use crate::par;

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability that the real scene is in front of the CG layer:
/// `1 / (1 + exp(−k·(d_cg − d_real)))`.
///
/// Pixels without CG depth get 0. Pixels with CG but no real depth get
/// `p_unknown`.
pub fn foreground_probability(
    d_real: &DepthMap,
    d_cg: &DepthMap,
    k: f64,
    p_unknown: f64,
) -> Result<ProbabilityMap> {
    check_dims(d_real.dims(), d_cg.dims())?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Config("sigmoid scale k must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p_unknown) {
        return Err(Error::Config("p_unknown must be in [0, 1]".into()));
    }
    let (w, h) = d_real.dims();
    let mut values = vec![0.0; w * h];
    par::for_each_row(&mut values, w, |y, row| {
        for (x, p) in row.iter_mut().enumerate() {
            *p = match (d_real.get(x, y), d_cg.get(x, y)) {
                (_, None) => 0.0,
                (None, Some(_)) => p_unknown,
                (Some(real), Some(cg)) => sigmoid(k * (cg - real)),
            };
        }
    });
    ProbabilityMap::new(w, h, values)
}
