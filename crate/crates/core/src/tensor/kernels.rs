//! Raw convolution kernels on row-major slices.
//!
//! Everything is expressed through one [`ConvGeometry`]: a convolution mapping
//! `[N, Cin, H, W]` to `[N, Cout, OH, OW]` with kernel `[Cout, Cin, KH, KW]`.
//! Transposed convolution reuses the same geometry with the roles of input and
//! output swapped, so it is the adjoint by construction.

use super::{Real, Result, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    /// Geometry of a forward convolution of `input` by `kernel`.
    pub fn conv(input: [usize; 4], kernel: [usize; 4], stride: usize, padding: usize) -> Result<Self> {
        let [n, cin, h, w] = input;
        let [cout, kcin, kh, kw] = kernel;
        if kcin != cin {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                detail: format!("input has {cin} channels, kernel expects {kcin}"),
            });
        }
        if stride == 0 {
            return Err(TensorError::InvalidGeometry { op: "conv2d", detail: "stride 0".into() });
        }
        let out_h = out_extent(h, kh, stride, padding)?;
        let out_w = out_extent(w, kw, stride, padding)?;
        Ok(ConvGeometry {
            batch: n,
            in_channels: cin,
            in_h: h,
            in_w: w,
            out_channels: cout,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            padding,
            out_h,
            out_w,
        })
    }

    /// Geometry of the convolution whose adjoint is the transposed convolution
    /// of `input` (`[N, C, H, W]`) by `kernel` (`[C, Cout, KH, KW]`).
    ///
    /// In the returned geometry the transposed convolution's output is the
    /// "input" side and its input is the "output" side.
    pub fn transposed(input: [usize; 4], kernel: [usize; 4], stride: usize, padding: usize) -> Result<Self> {
        let [n, c, h, w] = input;
        let [kc, cout, kh, kw] = kernel;
        if kc != c {
            return Err(TensorError::ShapeMismatch {
                op: "conv_transpose2d",
                detail: format!("input has {c} channels, kernel expects {kc}"),
            });
        }
        if stride == 0 {
            return Err(TensorError::InvalidGeometry { op: "conv_transpose2d", detail: "stride 0".into() });
        }
        let extent = |len: usize, k: usize| -> Result<usize> {
            let full = (len - 1) * stride + k;
            if full <= 2 * padding {
                return Err(TensorError::InvalidGeometry {
                    op: "conv_transpose2d",
                    detail: format!("output extent ({len}-1)*{stride} - 2*{padding} + {k} is not positive"),
                });
            }
            Ok(full - 2 * padding)
        };
        let oh = extent(h, kh)?;
        let ow = extent(w, kw)?;
        Ok(ConvGeometry {
            batch: n,
            in_channels: cout,
            in_h: oh,
            in_w: ow,
            out_channels: c,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            padding,
            out_h: h,
            out_w: w,
        })
    }

    pub fn input_shape(&self) -> [usize; 4] {
        [self.batch, self.in_channels, self.in_h, self.in_w]
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_item(&self) -> usize {
        self.in_channels * self.in_h * self.in_w
    }

    fn out_item(&self) -> usize {
        self.out_channels * self.out_plane()
    }

    /// 1x1, stride 1, no padding: the input plane is already the column matrix.
    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.padding == 0
    }
}

fn out_extent(len: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = len + 2 * padding;
    if padded < k || !(padded - k).is_multiple_of(stride) {
        return Err(TensorError::InvalidGeometry {
            op: "conv2d",
            detail: format!("({len} + 2*{padding} - {k}) is not a non-negative multiple of stride {stride}"),
        });
    }
    Ok((padded - k) / stride + 1)
}

/// Unfolds one batch item into a `patch_len x out_plane` column matrix.
fn im2col<T: Real>(g: &ConvGeometry, item: &[T], cols: &mut [T]) {
    let plane = g.out_plane();
    let (s, p) = (g.stride as isize, g.padding as isize);
    let mut row = 0;
    for c in 0..g.in_channels {
        let src = &item[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let y = oy as isize * s - p + ki as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if y < 0 || y >= g.in_h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src_row = &src[y as usize * g.in_w..(y as usize + 1) * g.in_w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let x = ox as isize * s - p + kj as isize;
                        *v = if x < 0 || x >= g.in_w as isize { T::zero() } else { src_row[x as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds a column matrix back onto one batch item (adjoint of [`im2col`]).
fn col2im<T: Real>(g: &ConvGeometry, cols: &[T], item: &mut [T]) {
    let plane = g.out_plane();
    let (s, p) = (g.stride as isize, g.padding as isize);
    let mut row = 0;
    for c in 0..g.in_channels {
        let dst = &mut item[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let y = oy as isize * s - p + ki as isize;
                    if y < 0 || y >= g.in_h as isize {
                        continue;
                    }
                    let dst_row = &mut dst[y as usize * g.in_w..(y as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let x = ox as isize * s - p + kj as isize;
                        if x >= 0 && x < g.in_w as isize {
                            dst_row[x as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Forward convolution. `bias` has `out_channels` entries.
pub fn conv2d_forward<T: Real>(g: &ConvGeometry, input: &[T], kernel: &[T], bias: Option<&[T]>) -> Vec<T> {
    let plane = g.out_plane();
    let mut out = vec![T::zero(); g.batch * g.out_item()];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); g.patch_len() * plane] };
    for n in 0..g.batch {
        let item = &input[n * g.in_item()..(n + 1) * g.in_item()];
        let dst = &mut out[n * g.out_item()..(n + 1) * g.out_item()];
        if let Some(bias) = bias {
            for (o, chunk) in dst.chunks_mut(plane).enumerate() {
                chunk.iter_mut().for_each(|v| *v = bias[o]);
            }
        }
        let b: &[T] = if g.is_pointwise() {
            item
        } else {
            im2col(g, item, &mut cols);
            &cols
        };
        T::gemm(g.out_channels, g.patch_len(), plane, kernel, false, b, false, dst, bias.is_some());
    }
    out
}

/// Gradient of the convolution with respect to its input, i.e. the transposed
/// convolution of `grad_out` by `kernel`.
pub fn conv2d_backward_input<T: Real>(g: &ConvGeometry, grad_out: &[T], kernel: &[T]) -> Vec<T> {
    let plane = g.out_plane();
    let mut grad_in = vec![T::zero(); g.batch * g.in_item()];
    let mut cols = vec![T::zero(); g.patch_len() * plane];
    for n in 0..g.batch {
        let go = &grad_out[n * g.out_item()..(n + 1) * g.out_item()];
        let gi = &mut grad_in[n * g.in_item()..(n + 1) * g.in_item()];
        if g.is_pointwise() {
            T::gemm(g.patch_len(), g.out_channels, plane, kernel, true, go, false, gi, false);
        } else {
            T::gemm(g.patch_len(), g.out_channels, plane, kernel, true, go, false, &mut cols, false);
            col2im(g, &cols, gi);
        }
    }
    grad_in
}

/// Gradient of the convolution with respect to its kernel, summed over the batch.
pub fn conv2d_backward_kernel<T: Real>(g: &ConvGeometry, input: &[T], grad_out: &[T]) -> Vec<T> {
    let plane = g.out_plane();
    let mut grad_k = vec![T::zero(); g.out_channels * g.patch_len()];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); g.patch_len() * plane] };
    for n in 0..g.batch {
        let item = &input[n * g.in_item()..(n + 1) * g.in_item()];
        let go = &grad_out[n * g.out_item()..(n + 1) * g.out_item()];
        let b: &[T] = if g.is_pointwise() {
            item
        } else {
            im2col(g, item, &mut cols);
            &cols
        };
        T::gemm(g.out_channels, plane, g.patch_len(), go, false, b, true, &mut grad_k, n > 0);
    }
    grad_k
}

/// Per-channel sum of an `[N, C, H, W]` buffer.
pub fn channel_sums<T: Real>(data: &[T], batch: usize, channels: usize, plane: usize) -> Vec<T> {
    let mut sums = vec![T::zero(); channels];
    for n in 0..batch {
        for (c, s) in sums.iter_mut().enumerate() {
            let base = (n * channels + c) * plane;
            for &v in &data[base..base + plane] {
                *s += v;
            }
        }
    }
    sums
}

pub fn nearest_upsample_forward<T: Real>(input: &[T], dims: [usize; 4], factor: usize) -> Vec<T> {
    let [n, c, h, w] = dims;
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in input.chunks(h * w).take(n * c) {
        for y in 0..oh {
            let row = &plane[(y / factor) * w..(y / factor + 1) * w];
            for x in 0..ow {
                out.push(row[x / factor]);
            }
        }
    }
    out
}

pub fn nearest_upsample_backward<T: Real>(grad: &[T], dims: [usize; 4], factor: usize) -> Vec<T> {
    let [n, c, h, w] = dims;
    let (oh, ow) = (h * factor, w * factor);
    let mut out = vec![T::zero(); n * c * h * w];
    for (p, plane) in grad.chunks(oh * ow).enumerate() {
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                dst[(y / factor) * w + x / factor] += plane[y * ow + x];
            }
        }
    }
    out
}
