//! Semantic label maps and uncertainty maps as PNG.
//!
//! Label maps are 8-bit indexed PNGs whose palette index is the label code
//! (see [`PALETTE`]). Grayscale images are read as raw codes and RGB images
//! are matched against the palette, so hand-painted maps also load.
//!
//! Uncertainty maps are 8-bit grayscale with white meaning certain:
//! `g = 1 - v / 255`, then clamped into `(ε, 1 - ε)`.

use std::io::Cursor;
use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::semantics::{SemanticLabel, SemanticMap};

/// Display colors indexed by label code.
pub const PALETTE: [[u8; 3]; 9] = [
    [128, 0, 0],     // Building
    [0, 192, 0],     // Grass
    [64, 0, 128],    // Car
    [128, 128, 64],  // Ground
    [128, 64, 128],  // Road
    [128, 128, 128], // Sky
    [128, 128, 0],   // Tree
    [96, 64, 32],    // TreeTrunk
    [0, 0, 0],       // Unknown
];

fn png_err(reason: impl ToString) -> Error {
    Error::format("PNG", reason.to_string())
}

/// Decoded raw 8-bit samples with their color layout.
struct RawPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    data: Vec<u8>,
}

fn decode_raw(bytes: &[u8]) -> Result<RawPng> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err("image too large"))?;
    let mut data = vec![0; size];
    let frame = reader.next_frame(&mut data).map_err(png_err)?;
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(png_err(format!(
            "unsupported bit depth {:?}",
            frame.bit_depth
        )));
    }
    data.truncate(frame.buffer_size());
    Ok(RawPng {
        width: frame.width as usize,
        height: frame.height as usize,
        color: frame.color_type,
        data,
    })
}

/// Label codes of a label PNG, before any validation of the code range.
pub fn decode_codes(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let raw = decode_raw(bytes)?;
    let n = raw.width * raw.height;
    let codes = match raw.color {
        png::ColorType::Indexed | png::ColorType::Grayscale => raw.data[..n].to_vec(),
        png::ColorType::GrayscaleAlpha => raw.data.chunks_exact(2).map(|c| c[0]).collect(),
        png::ColorType::Rgb | png::ColorType::Rgba => {
            let step = if raw.color == png::ColorType::Rgb {
                3
            } else {
                4
            };
            raw.data
                .chunks_exact(step)
                .map(|c| {
                    PALETTE
                        .iter()
                        .position(|p| p == &[c[0], c[1], c[2]])
                        .map_or(u8::MAX, |i| i as u8)
                })
                .collect()
        }
    };
    Ok((raw.width, raw.height, codes))
}

pub fn encode_labels(map: &SemanticMap) -> Result<Vec<u8>> {
    let (w, h) = map.dims();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(PALETTE.concat());
        let mut writer = enc.write_header().map_err(png_err)?;
        let codes: Vec<u8> = map.labels.iter().map(|l| l.code()).collect();
        writer.write_image_data(&codes).map_err(png_err)?;
    }
    Ok(out)
}

fn encode_gray(w: usize, h: usize, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(data).map_err(png_err)?;
    }
    Ok(out)
}

pub fn encode_uncertainty(map: &SemanticMap) -> Result<Vec<u8>> {
    let (w, h) = map.dims();
    let data: Vec<u8> = map
        .uncertainty
        .iter()
        .map(|g| ((1.0 - g) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    encode_gray(w, h, &data)
}

/// Uncertainty values of an 8-bit grayscale PNG, unclamped.
pub fn decode_uncertainty(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let raw = decode_raw(bytes)?;
    let step = match raw.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => {
            return Err(png_err(format!(
                "uncertainty map must be grayscale, got {other:?}"
            )))
        }
    };
    let g = raw
        .data
        .chunks_exact(step)
        .map(|c| 1.0 - c[0] as f64 / 255.0)
        .collect();
    Ok((raw.width, raw.height, g))
}

/// Loads a semantic map from its label and uncertainty PNGs.
///
/// Returns the map and the number of out-of-range codes that were read as
/// `Unknown`.
pub fn read_semantic_map(labels: &Path, uncertainty: &Path) -> Result<(SemanticMap, usize)> {
    let (w, h, codes) = decode_codes(&read_bytes(labels)?)?;
    let (uw, uh, g) = decode_uncertainty(&read_bytes(uncertainty)?)?;
    crate::error::check_dims((w, h), (uw, uh))?;
    let (map, unknown) = SemanticMap::from_codes(w, h, &codes, g)?;
    if unknown > 0 {
        log::warn!(
            "{}: {unknown} unknown label codes read as Unknown",
            labels.display()
        );
    }
    Ok((map, unknown))
}

pub fn write_semantic_map(labels: &Path, uncertainty: &Path, map: &SemanticMap) -> Result<()> {
    write_bytes(labels, &encode_labels(map)?)?;
    write_bytes(uncertainty, &encode_uncertainty(map)?)
}

/// Label map rendered through the palette as plain RGB, for viewing.
pub fn label_preview(map: &SemanticMap) -> Vec<[u8; 3]> {
    map.labels
        .iter()
        .map(|l| PALETTE[l.code() as usize])
        .collect()
}

pub fn label_from_color(rgb: [u8; 3]) -> SemanticLabel {
    PALETTE
        .iter()
        .position(|p| *p == rgb)
        .and_then(|i| SemanticLabel::from_code(i as u8))
        .unwrap_or(SemanticLabel::Unknown)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_map() -> SemanticMap {
        let labels: Vec<SemanticLabel> = (0..18).map(|i| SemanticLabel::ALL[i % 9]).collect();
        let g = (0..18).map(|i| i as f64 / 17.0).collect();
        SemanticMap::new(6, 3, labels, g).unwrap()
    }

    #[test]
    fn labels_round_trip_through_indexed_png() {
        let m = sample_map();
        let (w, h, codes) = decode_codes(&encode_labels(&m).unwrap()).unwrap();
        assert_eq!((w, h), (6, 3));
        let back: Vec<u8> = m.labels.iter().map(|l| l.code()).collect();
        assert_eq!(codes, back);
    }

    #[test]
    fn uncertainty_quantizes_to_one_step() {
        let m = sample_map();
        let (_, _, g) = decode_uncertainty(&encode_uncertainty(&m).unwrap()).unwrap();
        for (a, b) in g.iter().zip(&m.uncertainty) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn files_round_trip_and_count_unknown_codes() {
        let dir = tempfile::tempdir().unwrap();
        let (lp, up) = (dir.path().join("l.png"), dir.path().join("g.png"));
        let m = sample_map();
        write_semantic_map(&lp, &up, &m).unwrap();
        let (back, unknown) = read_semantic_map(&lp, &up).unwrap();
        assert_eq!(unknown, 0);
        assert_eq!(back.labels, m.labels);

        std::fs::write(&lp, encode_gray(2, 1, &[3, 200]).unwrap()).unwrap();
        std::fs::write(&up, encode_gray(2, 1, &[255, 0]).unwrap()).unwrap();
        let (back, unknown) = read_semantic_map(&lp, &up).unwrap();
        assert_eq!(unknown, 1);
        assert_eq!(
            back.labels,
            vec![SemanticLabel::Ground, SemanticLabel::Unknown]
        );
        // White is certain, black is uncertain; both clamp inside (0, 1).
        assert!(back.uncertainty[0] > 0.0 && back.uncertainty[0] < 1e-3);
        assert!(back.uncertainty[1] < 1.0 && back.uncertainty[1] > 1.0 - 1e-3);
    }

    #[test]
    fn palette_colors_map_back_to_labels() {
        for l in SemanticLabel::ALL {
            assert_eq!(label_from_color(PALETTE[l.code() as usize]), l);
        }
        assert_eq!(label_from_color([1, 2, 3]), SemanticLabel::Unknown);
    }
}
