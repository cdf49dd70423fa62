use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An aligned rainy/clean training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub rainy: Tensor,
    pub clean: Tensor,
}

/// Regular grid of `size x size` patches at `stride`, optionally followed by
/// horizontally flipped copies of every patch.
pub fn extract_patches(pair: &Pair, size: usize, stride: usize, flip: bool) -> Result<Vec<Pair>> {
    let (sx, sy) = (pair.rainy.shape(), pair.clean.shape());
    if sx != sy {
        return Err(Error::DimensionMismatch {
            op: "extract_patches",
            left: sx,
            right: sy,
        });
    }
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch size and stride must be >= 1".into()));
    }
    if sx.height() < size || sx.width() < size {
        return Err(Error::InvalidArgument(format!(
            "image {sx} is smaller than the {size}x{size} patch"
        )));
    }
    let mut out = Vec::new();
    for y in (0..=sx.height() - size).step_by(stride) {
        for x in (0..=sx.width() - size).step_by(stride) {
            out.push(Pair {
                rainy: pair.rainy.crop(y, x, size, size)?,
                clean: pair.clean.crop(y, x, size, size)?,
            });
        }
    }
    if flip {
        let flipped: Vec<Pair> = out
            .iter()
            .map(|p| Pair {
                rainy: p.rainy.flip_horizontal(),
                clean: p.clean.flip_horizontal(),
            })
            .collect();
        out.extend(flipped);
    }
    Ok(out)
}
