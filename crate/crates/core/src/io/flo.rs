//! Middlebury `.flo` optical flow files.
//!
//! Invalid vectors are stored as `1e10`; components with magnitude of at
//! least `1e9` or that are not finite read back as invalid.

use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::flow::FlowField;

const TAG: f32 = 202021.25;
const UNKNOWN: f32 = 1e10;
const UNKNOWN_THRESHOLD: f32 = 1e9;

pub fn encode(flow: &FlowField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(12 + w * h * 8);
    out.extend_from_slice(&TAG.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, &ok) in flow.u.iter().zip(&flow.valid) {
        let (a, b) = if ok {
            (u[0] as f32, u[1] as f32)
        } else {
            (UNKNOWN, UNKNOWN)
        };
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

fn le_f32(b: &[u8]) -> f32 {
    f32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

pub fn decode(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::format("FLO", "truncated header"));
    }
    if le_f32(&bytes[0..4]) != TAG {
        return Err(Error::format("FLO", "missing PIEH tag"));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::format("FLO", format!("bad dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let need = w * h * 8;
    if bytes.len() - 12 < need {
        return Err(Error::format("FLO", format!("expected {need} data bytes")));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for px in bytes[12..12 + need].chunks_exact(8) {
        let (a, b) = (le_f32(&px[0..4]), le_f32(&px[4..8]));
        let ok = a.is_finite()
            && b.is_finite()
            && a.abs() < UNKNOWN_THRESHOLD
            && b.abs() < UNKNOWN_THRESHOLD;
        u.push(if ok { [a as f64, b as f64] } else { [0.0, 0.0] });
        valid.push(ok);
    }
    FlowField::new(w, h, u, valid)
}

pub fn write(path: &Path, flow: &FlowField) -> Result<()> {
    write_bytes(path, &encode(flow))
}

pub fn read(path: &Path) -> Result<FlowField> {
    decode(&read_bytes(path)?)
}
