//! Raw numeric kernels on flat slices. No shape validation happens here;
//! callers in `graph` check shapes first.

/// Geometry of one 2-D convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    /// Rows of the unfolded patch matrix.
    pub fn k(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    pub fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Unfolds one image `[in_c, in_h, in_w]` into `[k, out_h*out_w]`.
fn im2col(src: &[f64], g: &ConvGeom, col: &mut [f64]) {
    let p = g.out_plane();
    let mut row = 0;
    for c in 0..g.in_c {
        let plane = &src[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let dst = &mut col[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize {
                        dst_row.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.in_w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of `im2col`: scatters-and-adds `[k, out_h*out_w]` into the image.
fn col2im(col: &[f64], g: &ConvGeom, dst: &mut [f64]) {
    let p = g.out_plane();
    let mut row = 0;
    for c in 0..g.in_c {
        let plane = &mut dst[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let src = &col[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.in_w {
                            dst_row[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` for row-major operands, with the
/// transposes expressed through strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices are at least as long as the strided extents above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn conv2d_forward(
    input: &[f64],
    batch: usize,
    weight: &[f64],
    bias: &[f64],
    g: &ConvGeom,
) -> Vec<f64> {
    let in_sz = g.in_c * g.in_h * g.in_w;
    let out_sz = g.out_c * g.out_plane();
    let p = g.out_plane();
    let mut out = vec![0.0; batch * out_sz];
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![0.0; g.k() * p] };
    for b in 0..batch {
        let src = &input[b * in_sz..(b + 1) * in_sz];
        let dst = &mut out[b * out_sz..(b + 1) * out_sz];
        for (oc, row) in dst.chunks_mut(p).enumerate() {
            row.fill(bias[oc]);
        }
        let cols: &[f64] = if g.is_pointwise() {
            src
        } else {
            im2col(src, g, &mut col);
            &col
        };
        gemm(g.out_c, g.k(), p, weight, false, cols, false, 1.0, dst);
    }
    out
}

/// Accumulates gradients for a convolution. Any of the three outputs may be
/// skipped by passing `None`.
pub(crate) fn conv2d_backward(
    input: &[f64],
    batch: usize,
    weight: &[f64],
    grad_out: &[f64],
    g: &ConvGeom,
    mut grad_input: Option<&mut [f64]>,
    mut grad_weight: Option<&mut [f64]>,
    mut grad_bias: Option<&mut [f64]>,
) {
    let in_sz = g.in_c * g.in_h * g.in_w;
    let out_sz = g.out_c * g.out_plane();
    let p = g.out_plane();
    let k = g.k();
    let mut col = vec![0.0; k * p];
    for b in 0..batch {
        let dy = &grad_out[b * out_sz..(b + 1) * out_sz];
        if let Some(gb) = grad_bias.as_deref_mut() {
            for (oc, row) in dy.chunks(p).enumerate() {
                gb[oc] += row.iter().sum::<f64>();
            }
        }
        if let Some(gw) = grad_weight.as_deref_mut() {
            let src = &input[b * in_sz..(b + 1) * in_sz];
            let cols: &[f64] = if g.is_pointwise() {
                src
            } else {
                im2col(src, g, &mut col);
                &col
            };
            // dW[oc, k] += dY[oc, p] * col[k, p]^T
            gemm(g.out_c, p, k, dy, false, cols, true, 1.0, gw);
        }
        if let Some(gi) = grad_input.as_deref_mut() {
            let dst = &mut gi[b * in_sz..(b + 1) * in_sz];
            if g.is_pointwise() {
                gemm(k, g.out_c, p, weight, true, dy, false, 1.0, dst);
            } else {
                // dcol[k, p] = W[oc, k]^T * dY[oc, p]
                gemm(k, g.out_c, p, weight, true, dy, false, 0.0, &mut col);
                col2im(&col, g, dst);
            }
        }
    }
}

/// One 1-D correlation pass along rows (`along_rows = true`, i.e. over x) or
/// columns, for every plane: `dst[i] = sum_t kernel[t] * src[i + t - shift]`
/// with out-of-range source samples treated as zero.
pub(crate) fn correlate_1d(
    src: &[f64],
    planes: usize,
    src_h: usize,
    src_w: usize,
    kernel: &[f64],
    shift: usize,
    along_rows: bool,
    dst_len: usize,
) -> Vec<f64> {
    let (dst_h, dst_w) = if along_rows {
        (src_h, dst_len)
    } else {
        (dst_len, src_w)
    };
    let taps = kernel.len() as isize;
    let shift = shift as isize;
    let mut dst = vec![0.0; planes * dst_h * dst_w];
    for p in 0..planes {
        let s = &src[p * src_h * src_w..(p + 1) * src_h * src_w];
        let d = &mut dst[p * dst_h * dst_w..(p + 1) * dst_h * dst_w];
        if along_rows {
            let n = src_w as isize;
            for y in 0..dst_h {
                let srow = &s[y * src_w..(y + 1) * src_w];
                let drow = &mut d[y * dst_w..(y + 1) * dst_w];
                for (i, out) in drow.iter_mut().enumerate() {
                    let base = i as isize - shift;
                    let t0 = (-base).max(0);
                    let t1 = (n - base).min(taps);
                    let mut acc = 0.0;
                    for t in t0..t1 {
                        acc += kernel[t as usize] * srow[(base + t) as usize];
                    }
                    *out = acc;
                }
            }
        } else {
            let n = src_h as isize;
            for i in 0..dst_h {
                let base = i as isize - shift;
                let t0 = (-base).max(0);
                let t1 = (n - base).min(taps);
                let drow = &mut d[i * dst_w..(i + 1) * dst_w];
                for t in t0..t1 {
                    let kv = kernel[t as usize];
                    let srow = &s[(base + t) as usize * src_w..((base + t) as usize + 1) * src_w];
                    for (o, v) in drow.iter_mut().zip(srow) {
                        *o += kv * v;
                    }
                }
            }
        }
    }
    dst
}

/// Separable 2-D filter with a symmetric 1-D kernel, applied per plane.
/// `shift` selects the alignment: `radius` keeps the size (zero padding),
/// `0` gives the valid region, `2 * radius` is the adjoint of valid.
pub(crate) fn separable(
    src: &[f64],
    planes: usize,
    h: usize,
    w: usize,
    kernel: &[f64],
    shift: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let tmp = correlate_1d(src, planes, h, w, kernel, shift, true, out_w);
    correlate_1d(&tmp, planes, h, out_w, kernel, shift, false, out_h)
}
