//! Single-channel portable float maps (`Pf`).
//!
//! Rows are stored bottom-up; a negative scale marks little-endian data.
//! Invalid samples are written as `+inf` and any non-finite value reads back
//! as invalid.

use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::image::{DepthMap, ScalarMap};

pub fn encode(map: &ScalarMap) -> Vec<u8> {
    let (w, h) = map.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let i = y * w + x;
            let v = if map.valid[i] {
                map.values[i] as f32
            } else {
                f32::INFINITY
            };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("PFM", "truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::format("PFM", "non-ASCII header"))
}

pub fn decode(bytes: &[u8]) -> Result<ScalarMap> {
    let mut pos = 0;
    match header_token(bytes, &mut pos)? {
        "Pf" => {}
        "PF" => {
            return Err(Error::format(
                "PFM",
                "three-channel PFM is not a scalar map",
            ))
        }
        other => return Err(Error::format("PFM", format!("bad magic {other:?}"))),
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::format("PFM", format!("bad dimension {s:?}")))
    };
    let w = parse_dim(header_token(bytes, &mut pos)?)?;
    let h = parse_dim(header_token(bytes, &mut pos)?)?;
    let scale: f64 = header_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::format("PFM", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("PFM", "scale must be non-zero"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("PFM", "dimensions overflow"))?;
    let data = bytes
        .get(pos..)
        .filter(|d| d.len() >= need)
        .ok_or_else(|| Error::format("PFM", format!("expected {need} data bytes")))?;
    let little = scale < 0.0;
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for (k, chunk) in data[..need].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row, x) = (k / w, k % w);
        let i = (h - 1 - row) * w + x;
        if v.is_finite() {
            values[i] = v as f64;
            valid[i] = true;
        }
    }
    ScalarMap::new(w, h, values, valid)
}

pub fn write_scalar(path: &Path, map: &ScalarMap) -> Result<()> {
    write_bytes(path, &encode(map))
}

pub fn read_scalar(path: &Path) -> Result<ScalarMap> {
    decode(&read_bytes(path)?)
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    write_scalar(path, depth)
}

/// Reads a depth map; non-positive samples are treated as invalid.
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    Ok(DepthMap::from_scalar(read_scalar(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values_and_validity() {
        let values: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 + 1.0).collect();
        let mut valid = vec![true; 12];
        valid[5] = false;
        let mut m = ScalarMap::new(4, 3, values, valid).unwrap();
        m.values[5] = 0.0;
        let back = decode(&encode(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rows_are_bottom_up() {
        let m = ScalarMap::new(1, 2, vec![1.0, 2.0], vec![true, true]).unwrap();
        let bytes = encode(&m);
        let body = &bytes[bytes.len() - 8..];
        assert_eq!(f32::from_le_bytes(body[0..4].try_into().unwrap()), 2.0);
    }

    #[test]
    fn big_endian_is_accepted() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.5f32.to_be_bytes());
        bytes.extend_from_slice(&f32::NAN.to_be_bytes());
        let m = decode(&bytes).unwrap();
        assert_eq!(m.get(0, 0), Some(3.5));
        assert_eq!(m.get(1, 0), None);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(decode(b"P5\n1 1\n-1\n\0\0\0\0").is_err());
        assert!(decode(b"Pf\n2 2\n-1\n\0\0\0\0").is_err());
        assert!(decode(b"Pf\n0 2\n-1\n").is_err());
        assert!(decode(b"PF\n1 1\n-1\n").is_err());
    }

    #[test]
    fn nonpositive_depth_reads_invalid() {
        let m = ScalarMap::new(3, 1, vec![-1.0, 0.0, 2.0], vec![true; 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pfm");
        write_scalar(&p, &m).unwrap();
        let d = read_depth(&p).unwrap();
        assert_eq!(d.valid, vec![false, false, true]);
    }
}
