use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn dims(input: &Tensor, weights: &Tensor) -> Result<(usize, usize, usize)> {
    input.expect_rank(2, "dense input")?;
    weights.expect_rank(2, "dense weights")?;
    let (n, f) = (input.shape()[0], input.shape()[1]);
    let (wf, g) = (weights.shape()[0], weights.shape()[1]);
    if wf != f {
        return Err(Error::Shape(format!(
            "dense: input has {f} features, weights expect {wf}"
        )));
    }
    Ok((n, f, g))
}

/// `input (N×F) · weights (F×G) + bias (G)`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, f, g) = dims(input, weights)?;
    bias.expect_shape(&[g], "dense bias")?;
    let (x, w) = (input.data(), weights.data());
    let mut out = Vec::with_capacity(n * g);
    for r in 0..n {
        out.extend_from_slice(bias.data());
        let row = &mut out[r * g..];
        for (k, &xv) in x[r * f..(r + 1) * f].iter().enumerate() {
            for (o, &wv) in row.iter_mut().zip(&w[k * g..(k + 1) * g]) {
                *o += xv * wv;
            }
        }
    }
    Tensor::from_vec(vec![n, g], out)
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
    let (n, f, g) = dims(input, weights)?;
    upstream.expect_shape(&[n, g], "dense upstream")?;
    let (x, w, up) = (input.data(), weights.data(), upstream.data());
    let mut gx = vec![0.0f32; n * f];
    let mut gw = vec![0.0f32; f * g];
    let mut gb = vec![0.0f32; g];
    for r in 0..n {
        let dy = &up[r * g..(r + 1) * g];
        for (b, d) in gb.iter_mut().zip(dy) {
            *b += d;
        }
        for k in 0..f {
            let xv = x[r * f + k];
            let wrow = &w[k * g..(k + 1) * g];
            let mut acc = 0.0f32;
            for ((gwv, &wv), &d) in gw[k * g..(k + 1) * g].iter_mut().zip(wrow).zip(dy) {
                *gwv += xv * d;
                acc += wv * d;
            }
            gx[r * f + k] = acc;
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(vec![n, f], gx)?,
        weights: Tensor::from_vec(vec![f, g], gw)?,
        bias: Tensor::from_vec(vec![g], gb)?,
    })
}
