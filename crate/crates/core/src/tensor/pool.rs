use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Flat input positions selected by a 2×2 max-pool, one per output element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// 2×2 window, stride 2. Ties resolve to the first element in row-major order.
pub fn maxpool2x2_forward(input: &Tensor) -> Result<(Tensor, PoolIndices)> {
    input.expect_rank(4, "maxpool input")?;
    let &[n, c, h, w] = input.shape() else {
        unreachable!()
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!(
            "maxpool2x2 needs even H and W, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_vec(vec![n, c, oh, ow], out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward(indices: &PoolIndices, upstream: &Tensor) -> Result<Tensor> {
    if upstream.len() != indices.argmax.len() {
        return Err(Error::Shape(format!(
            "maxpool backward: {} upstream values for {} pooled positions",
            upstream.len(),
            indices.argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(indices.input_shape.clone());
    let g = grad.data_mut();
    for (&idx, &d) in indices.argmax.iter().zip(upstream.data()) {
        g[idx] += d;
    }
    Ok(grad)
}

/// Mean over the spatial axes: NCHW → N×C.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    input.expect_rank(4, "global_avg_pool input")?;
    let &[n, c, h, w] = input.shape() else {
        unreachable!()
    };
    let plane = h * w;
    let out = input
        .data()
        .chunks_exact(plane)
        .map(|p| p.iter().sum::<f32>() / plane as f32)
        .collect();
    Tensor::from_vec(vec![n, c], out)
}

pub fn global_avg_pool_backward(input_shape: &[usize], upstream: &Tensor) -> Result<Tensor> {
    let &[n, c, h, w] = input_shape else {
        return Err(Error::Shape(format!(
            "global_avg_pool backward: bad input shape {input_shape:?}"
        )));
    };
    upstream.expect_shape(&[n, c], "global_avg_pool upstream")?;
    let plane = h * w;
    let scale = 1.0 / plane as f32;
    let mut data = Vec::with_capacity(n * c * plane);
    for &d in upstream.data() {
        data.extend(std::iter::repeat_n(d * scale, plane));
    }
    Tensor::from_vec(input_shape.to_vec(), data)
}
