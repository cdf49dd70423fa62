//! Image files, checkpoints and run configuration files.

pub mod checkpoint;
pub mod config;
pub mod ppm;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Reads an image as a `1 x 3 x h x w` tensor in `[0, 1]`.
pub fn read_image(path: &Path) -> Result<Tensor> {
    match extension(path).as_str() {
        "ppm" => ppm::read(path),
        "png" => read_png(path),
        other => Err(Error::Image(format!(
            "unsupported image extension `{other}` for {}",
            path.display()
        ))),
    }
}

/// Writes a 1- or 3-channel tensor, clamped to `[0, 1]` and rounded to 8 bits.
pub fn write_image(path: &Path, image: &Tensor) -> Result<()> {
    match extension(path).as_str() {
        "ppm" => ppm::write(path, image),
        "png" => write_png(path, image),
        other => Err(Error::Image(format!(
            "unsupported image extension `{other}` for {}",
            path.display()
        ))),
    }
}

pub fn is_image(path: &Path) -> bool {
    matches!(extension(path).as_str(), "ppm" | "png")
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(feature = "png")]
fn read_png(path: &Path) -> Result<Tensor> {
    use crate::tensor::Shape;
    let img = image::open(path)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| {
        img.get_pixel(x as u32, y as u32)[c] as f64 / 255.0
    }))
}

#[cfg(feature = "png")]
fn write_png(path: &Path, t: &Tensor) -> Result<()> {
    let s = t.shape();
    let gray = s.channels() == 1;
    let img = image::RgbImage::from_fn(s.width() as u32, s.height() as u32, |x, y| {
        image::Rgb(std::array::from_fn(|c| {
            ppm::quantize(t.at(0, if gray { 0 } else { c }, y as usize, x as usize))
        }))
    });
    img.save(path)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

#[cfg(not(feature = "png"))]
fn read_png(path: &Path) -> Result<Tensor> {
    Err(Error::Image(format!(
        "{}: PNG support needs the `png` feature",
        path.display()
    )))
}

#[cfg(not(feature = "png"))]
fn write_png(path: &Path, _: &Tensor) -> Result<()> {
    read_png(path).map(|_| ())
}
