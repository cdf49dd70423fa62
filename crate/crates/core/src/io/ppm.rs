//! Binary PPM (P6), 8 bits per sample.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_number(bytes: &[u8], pos: usize, what: &str) -> Result<(usize, usize)> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Image(format!("PPM header: expected {what}")));
    }
    let value = std::str::from_utf8(&bytes[start..end])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Image(format!("PPM header: bad {what}")))?;
    Ok((value, end))
}

/// Decodes a P6 image into a `1 x 3 x h x w` tensor with values `v / 255`.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Image("not a binary PPM (missing P6 magic)".into()));
    }
    let (width, pos) = read_number(bytes, 2, "width")?;
    let (height, pos) = read_number(bytes, pos, "height")?;
    let (maxval, pos) = read_number(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Image("PPM header: zero dimension".into()));
    }
    if maxval != 255 {
        return Err(Error::Image(format!(
            "PPM maxval {maxval} unsupported (only 8-bit, maxval 255)"
        )));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Image("PPM header: missing separator before pixels".into()));
    }
    let pixels = &bytes[pos + 1..];
    let need = width * height * 3;
    if pixels.len() < need {
        return Err(Error::Image(format!(
            "truncated PPM payload: need {need} bytes, got {}",
            pixels.len()
        )));
    }
    let plane = width * height;
    let mut data = vec![0.0; 3 * plane];
    for (i, px) in pixels[..need].chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f64 / 255.0;
        }
    }
    Tensor::new(Shape::new(1, 3, height, width), data)
}

/// `[0, 1]` to `[0, 255]` with clamping and round-half-away-from-zero.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes the first batch item of a 1- or 3-channel tensor as P6. A single
/// channel is written as gray.
pub fn encode(image: &Tensor) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.channels() != 1 && s.channels() != 3 {
        return Err(Error::Image(format!(
            "can only write 1 or 3 channels, got {s}"
        )));
    }
    let (h, w) = (s.height(), s.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let ch = if s.channels() == 1 { 0 } else { c };
                out.push(quantize(image.at(0, ch, y, x)));
            }
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Tensor> {
    decode(&std::fs::read(path)?)
}

pub fn write(path: &Path, image: &Tensor) -> Result<()> {
    std::fs::write(path, encode(image)?)?;
    Ok(())
}
