use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

struct ConvGeometry {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    stride: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeometry {
    fn new(input: &Tensor, weights: &Tensor, stride: usize) -> Result<Self> {
        input.expect_rank(4, "conv2d input")?;
        weights.expect_rank(4, "conv2d weights")?;
        let &[batch, in_ch, h, w] = input.shape() else {
            unreachable!()
        };
        let &[out_ch, w_in, k, k2] = weights.shape() else {
            unreachable!()
        };
        if w_in != in_ch {
            return Err(Error::Shape(format!(
                "conv2d: input has {in_ch} channels, weights expect {w_in}"
            )));
        }
        if k != k2 || k % 2 == 0 {
            return Err(Error::Shape(format!(
                "conv2d: kernel must be square and odd, got {k}x{k2}"
            )));
        }
        if stride == 0 {
            return Err(Error::Domain("conv2d: stride must be positive".into()));
        }
        Ok(ConvGeometry {
            batch,
            in_ch,
            out_ch,
            h,
            w,
            k,
            pad: (k - 1) / 2,
            stride,
            oh: h.div_ceil(stride),
            ow: w.div_ceil(stride),
        })
    }

    /// Output columns `ox` whose input column `ox*stride + kx - pad` lies in
    /// `0..w`.
    fn valid_ox(&self, kx: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kx).div_ceil(self.stride);
        // Largest ox with ox*stride + kx - pad <= w - 1.
        let Some(limit) = (self.w + self.pad).checked_sub(kx).filter(|&l| l > 0) else {
            return (lo, lo);
        };
        let hi = ((limit - 1) / self.stride + 1).min(self.ow);
        (lo, hi.max(lo))
    }

    fn input_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad)?;
        (iy < self.h).then_some(iy)
    }
}

/// Zero-padded "same" cross-correlation followed by striding. Output spatial
/// size is `ceil(H/stride) × ceil(W/stride)`.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(input, weights, stride)?;
    bias.expect_shape(&[g.out_ch], "conv2d bias")?;
    let (x, wt, b) = (input.data(), weights.data(), bias.data());
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut out = vec![0.0f32; g.batch * g.out_ch * plane_out];

    for n in 0..g.batch {
        for o in 0..g.out_ch {
            let dst = &mut out[(n * g.out_ch + o) * plane_out..][..plane_out];
            dst.fill(b[o]);
            for i in 0..g.in_ch {
                let src = &x[(n * g.in_ch + i) * plane_in..][..plane_in];
                let kern = &wt[(o * g.in_ch + i) * g.k * g.k..][..g.k * g.k];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let wv = kern[ky * g.k + kx];
                        let (lo, hi) = g.valid_ox(kx);
                        if lo == hi {
                            continue;
                        }
                        for oy in 0..g.oh {
                            let Some(iy) = g.input_row(oy, ky) else {
                                continue;
                            };
                            let row_in = &src[iy * g.w..][..g.w];
                            let row_out = &mut dst[oy * g.ow..][..g.ow];
                            if g.stride == 1 {
                                let off = lo + kx - g.pad;
                                for (d, s) in row_out[lo..hi].iter_mut().zip(&row_in[off..]) {
                                    *d += wv * s;
                                }
                            } else {
                                for ox in lo..hi {
                                    row_out[ox] += wv * row_in[ox * g.stride + kx - g.pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(vec![g.batch, g.out_ch, g.oh, g.ow], out)
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    stride: usize,
) -> Result<ConvGrads> {
    let g = ConvGeometry::new(input, weights, stride)?;
    upstream.expect_shape(&[g.batch, g.out_ch, g.oh, g.ow], "conv2d upstream")?;
    let (x, wt, up) = (input.data(), weights.data(), upstream.data());
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut gx = vec![0.0f32; x.len()];
    let mut gw = vec![0.0f32; wt.len()];
    let mut gb = vec![0.0f32; g.out_ch];

    for n in 0..g.batch {
        for o in 0..g.out_ch {
            let dy = &up[(n * g.out_ch + o) * plane_out..][..plane_out];
            gb[o] += dy.iter().sum::<f32>();
            for i in 0..g.in_ch {
                let base_in = (n * g.in_ch + i) * plane_in;
                let src = &x[base_in..][..plane_in];
                let kbase = (o * g.in_ch + i) * g.k * g.k;
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let wv = wt[kbase + ky * g.k + kx];
                        let (lo, hi) = g.valid_ox(kx);
                        if lo == hi {
                            continue;
                        }
                        let mut acc = 0.0f32;
                        for oy in 0..g.oh {
                            let Some(iy) = g.input_row(oy, ky) else {
                                continue;
                            };
                            let row_dy = &dy[oy * g.ow..][..g.ow];
                            let row_start = base_in + iy * g.w;
                            if g.stride == 1 {
                                let off = lo + kx - g.pad;
                                let n = hi - lo;
                                let dys = &row_dy[lo..hi];
                                let xs = &src[iy * g.w + off..][..n];
                                acc += dys.iter().zip(xs).map(|(d, s)| d * s).sum::<f32>();
                                for (gxv, d) in gx[row_start + off..][..n].iter_mut().zip(dys) {
                                    *gxv += d * wv;
                                }
                            } else {
                                #[allow(clippy::needless_range_loop)]
                                for ox in lo..hi {
                                    let ix = ox * g.stride + kx - g.pad;
                                    acc += row_dy[ox] * src[iy * g.w + ix];
                                    gx[row_start + ix] += row_dy[ox] * wv;
                                }
                            }
                        }
                        gw[kbase + ky * g.k + kx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_vec(input.shape().to_vec(), gx)?,
        weights: Tensor::from_vec(weights.shape().to_vec(), gw)?,
        bias: Tensor::from_vec(vec![g.out_ch], gb)?,
    })
}
