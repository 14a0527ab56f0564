//! Binary 16-bit PGM (P5, maxval 65535) for grayscale images in [0, 1].

use std::fs;
use std::path::Path;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

const MAXVAL: f64 = 65535.0;

/// Encodes a `[h, w]` (or `[1, h, w, 1]`) image; values are clamped to [0, 1].
pub fn encode<T: Real>(image: &Tensor<T>) -> Result<Vec<u8>> {
    let (h, w) = match *image.shape() {
        [h, w] | [1, h, w, 1] | [h, w, 1] => (h, w),
        ref s => return Err(shape_err!("PGM needs a single-channel image, got {s:?}")),
    };
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(2 * h * w);
    for &v in image.data() {
        let q = (v.to_f64().clamp(0.0, 1.0) * MAXVAL).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<Tensor<T>> {
    let bad = |m: &str| Error::Parse(format!("PGM: {m}"));
    // header: magic, width, height, maxval separated by whitespace, then one whitespace byte
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad number"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range"));
    }
    let wide = maxval > 255;
    let bpp = if wide { 2 } else { 1 };
    let body = bytes.get(pos..pos + h * w * bpp).ok_or_else(|| bad("truncated pixels"))?;
    let data = (0..h * w)
        .map(|i| {
            let q = if wide {
                u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as f64
            } else {
                body[i] as f64
            };
            T::from_f64(q / maxval as f64)
        })
        .collect();
    Tensor::new([h, w], data)
}

pub fn write_pgm<T: Real>(path: &Path, image: &Tensor<T>) -> Result<()> {
    fs::write(path, encode(image)?)?;
    Ok(())
}

pub fn read_pgm<T: Real>(path: &Path) -> Result<Tensor<T>> {
    decode(&fs::read(path)?)
}
