//! Binary PGM (P5) and PPM (P6) with maxval 255.
//!
//! Grayscale images load as UINT8 `[width, height]`; colour images as UINT8
//! `[3, width, height]` with interleaved channels.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ndarray::{NDArray, Storage};

pub fn read_image(path: impl AsRef<Path>) -> Result<NDArray> {
    parse_image(&std::fs::read(path)?)
}

pub fn write_image(path: impl AsRef<Path>, array: &NDArray) -> Result<()> {
    std::fs::write(path, encode_image(array)?)?;
    Ok(())
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedFile(msg.into())
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn token<'a>(b: &'a [u8], at: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *at < b.len() && b[*at].is_ascii_whitespace() {
            *at += 1;
        }
        if *at < b.len() && b[*at] == b'#' {
            while *at < b.len() && b[*at] != b'\n' {
                *at += 1;
            }
        } else {
            break;
        }
    }
    let start = *at;
    while *at < b.len() && !b[*at].is_ascii_whitespace() && b[*at] != b'#' {
        *at += 1;
    }
    if start == *at {
        return Err(malformed("truncated image header"));
    }
    Ok(&b[start..*at])
}

fn number(b: &[u8], at: &mut usize, what: &str) -> Result<usize> {
    let t = token(b, at)?;
    std::str::from_utf8(t)
        .ok()
        .filter(|s| s.bytes().all(|c| c.is_ascii_digit()))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(format!("bad {what} in image header")))
}

pub fn parse_image(bytes: &[u8]) -> Result<NDArray> {
    let mut at = 0;
    let channels = match token(bytes, &mut at)? {
        b"P5" => 1,
        b"P6" => 3,
        m @ (b"P1" | b"P2" | b"P3" | b"P4") => {
            return Err(Error::UnsupportedFeature(format!("{} netpbm variant", String::from_utf8_lossy(m))))
        }
        _ => return Err(malformed("not a PGM/PPM file")),
    };
    let width = number(bytes, &mut at, "width")?;
    let height = number(bytes, &mut at, "height")?;
    let maxval = number(bytes, &mut at, "maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFeature(format!("maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(malformed("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(at).is_some_and(u8::is_ascii_whitespace) {
        return Err(malformed("missing whitespace before raster"));
    }
    at += 1;
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| malformed("image dimensions overflow"))?;
    let raster = bytes.get(at..).filter(|r| r.len() >= len).ok_or_else(|| malformed("truncated raster"))?;
    let dims = if channels == 1 { vec![width, height] } else { vec![3, width, height] };
    NDArray::new(dims, Storage::UInt8(raster[..len].to_vec())).map_err(|e| malformed(e.to_string()))
}

/// Encodes UINT8 data as-is and FLOAT32 data in `[0, 1]` as `round(v * 255)`.
pub fn encode_image(array: &NDArray) -> Result<Vec<u8>> {
    let (magic, width, height) = match array.dims() {
        &[w, h] => ("P5", w, h),
        &[3, w, h] => ("P6", w, h),
        dims => {
            return Err(Error::ShapeMismatch(format!("images are [width, height] or [3, width, height], got {dims:?}")))
        }
    };
    let raster: Vec<u8> = match array.storage() {
        Storage::UInt8(v) => v.clone(),
        Storage::Float32(v) => v.iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8).collect(),
        other => {
            return Err(Error::UnsupportedElementType(format!(
                "images are written from UINT8 or FLOAT32, not {:?}",
                other.element_type()
            )))
        }
    };
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&raster);
    Ok(out)
}
