//! Independent `f64` reference implementations and finite-difference
//! gradient checks shared by the integration tests and the acceptance
//! suite. Nothing here calls the library's forward code paths.

#![allow(dead_code)]

use actkit::kernels::{activate_batch_backward, ActivationKind};
use actkit::modelspec::Model;
use actkit::tensor::{
    conv2d_backward, dense_backward, global_avg_pool_backward, maxpool2x2_backward,
    maxpool2x2_forward, softmax_cross_entropy, Rng, Tensor,
};

pub const FD_STEP: f64 = 1e-3;
pub const GRAD_TOL: f64 = 1e-3;
pub const KNOTS: [f64; 4] = [-3.0, 0.0, 3.0, 6.0];

pub fn ref_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn ref_relu6(x: f64) -> f64 {
    x.clamp(0.0, 6.0)
}

/// Straight transcriptions of the textbook formulas.
pub fn ref_activation(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Relu => x.max(0.0),
        ActivationKind::Relu6 => ref_relu6(x),
        ActivationKind::Sigmoid => ref_sigmoid(x),
        ActivationKind::Swish => x * ref_sigmoid(x),
        ActivationKind::HardSwish => x * ref_relu6(x + 3.0) / 6.0,
    }
}

pub fn near_knot(x: f64, radius: f64) -> bool {
    KNOTS.iter().any(|k| (x - k).abs() < radius)
}

/// `|analytic − numeric| / max(1, |numeric|)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f32], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a as f64, n))
        .fold(0.0, f64::max)
}

pub fn random_tensor(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(lo, hi) as f32).collect();
    Tensor::from_vec(shape, data).unwrap()
}

pub fn to_f64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Naive layer oracles
// ---------------------------------------------------------------------------

/// Direct nested-loop "same" convolution with stride.
pub fn naive_conv(
    x: &[f64],
    [n, c, h, w]: [usize; 4],
    wt: &[f64],
    [o, _, k, _]: [usize; 4],
    b: &[f64],
    stride: usize,
) -> (Vec<f64>, [usize; 4]) {
    let pad = (k - 1) as isize / 2;
    let oh = h.div_ceil(stride);
    let ow = w.div_ceil(stride);
    let mut out = vec![0.0; n * o * oh * ow];
    for ni in 0..n {
        for oi in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[oi];
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad;
                                let ix = (ox * stride + kx) as isize - pad;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = x[((ni * c + ci) * h + iy as usize) * w + ix as usize];
                                acc += xv * wt[((oi * c + ci) * k + ky) * k + kx];
                            }
                        }
                    }
                    out[((ni * o + oi) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, [n, o, oh, ow])
}

pub fn naive_dense(x: &[f64], n: usize, f: usize, wt: &[f64], g: usize, b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * g];
    for r in 0..n {
        for j in 0..g {
            out[r * g + j] = b[j] + (0..f).map(|k| x[r * f + k] * wt[k * g + j]).sum::<f64>();
        }
    }
    out
}

pub fn naive_maxpool(x: &[f64], [n, c, h, w]: [usize; 4]) -> Vec<f64> {
    let mut out = Vec::new();
    for p in 0..n * c {
        for oy in 0..h / 2 {
            for ox in 0..w / 2 {
                let at = |dy: usize, dx: usize| x[p * h * w + (2 * oy + dy) * w + 2 * ox + dx];
                out.push(at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1)));
            }
        }
    }
    out
}

pub fn naive_gap(x: &[f64], [n, c, h, w]: [usize; 4]) -> Vec<f64> {
    (0..n * c)
        .map(|p| x[p * h * w..(p + 1) * h * w].iter().sum::<f64>() / (h * w) as f64)
        .collect()
}

pub fn naive_softmax_ce(logits: &[f64], c: usize, labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for (r, &l) in labels.iter().enumerate() {
        let row = &logits[r * c..(r + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[l];
    }
    total / n as f64
}

fn dims4(t: &Tensor) -> [usize; 4] {
    t.shape().try_into().unwrap()
}

// ---------------------------------------------------------------------------
// Gradient-check cases: each returns the max relative error of one random
// configuration.
// ---------------------------------------------------------------------------

pub fn conv_case(rng: &mut Rng) -> f64 {
    let n = 1 + rng.below(2);
    let c = 1 + rng.below(3);
    let o = 1 + rng.below(3);
    let h = 1 + rng.below(6);
    let w = 1 + rng.below(6);
    let k = [1, 3, 5][rng.below(3)];
    let stride = 1 + rng.below(2);
    let x = random_tensor(vec![n, c, h, w], -1.0, 1.0, rng);
    let wt = random_tensor(vec![o, c, k, k], -1.0, 1.0, rng);
    let b = random_tensor(vec![o], -1.0, 1.0, rng);
    let oshape = [n, o, h.div_ceil(stride), w.div_ceil(stride)];
    let up = random_tensor(oshape.to_vec(), -1.0, 1.0, rng);
    let r = to_f64(&up);

    let grads = conv2d_backward(&x, &wt, &up, stride).unwrap();
    let (xs, ws, bs) = (to_f64(&x), to_f64(&wt), to_f64(&b));
    let (xd, wd) = (dims4(&x), dims4(&wt));
    let gx = central_diff(
        |v| dot(&naive_conv(v, xd, &ws, wd, &bs, stride).0, &r),
        &xs,
        FD_STEP,
    );
    let gw = central_diff(
        |v| dot(&naive_conv(&xs, xd, v, wd, &bs, stride).0, &r),
        &ws,
        FD_STEP,
    );
    let gb = central_diff(
        |v| dot(&naive_conv(&xs, xd, &ws, wd, v, stride).0, &r),
        &bs,
        FD_STEP,
    );
    max_rel_err(grads.input.data(), &gx)
        .max(max_rel_err(grads.weights.data(), &gw))
        .max(max_rel_err(grads.bias.data(), &gb))
}

pub fn dense_case(rng: &mut Rng) -> f64 {
    let n = 1 + rng.below(4);
    let f = 1 + rng.below(8);
    let g = 1 + rng.below(6);
    let x = random_tensor(vec![n, f], -1.0, 1.0, rng);
    let wt = random_tensor(vec![f, g], -1.0, 1.0, rng);
    let b = random_tensor(vec![g], -1.0, 1.0, rng);
    let up = random_tensor(vec![n, g], -1.0, 1.0, rng);
    let r = to_f64(&up);
    let grads = dense_backward(&x, &wt, &up).unwrap();
    let (xs, ws, bs) = (to_f64(&x), to_f64(&wt), to_f64(&b));
    let gx = central_diff(
        |v| dot(&naive_dense(v, n, f, &ws, g, &bs), &r),
        &xs,
        FD_STEP,
    );
    let gw = central_diff(
        |v| dot(&naive_dense(&xs, n, f, v, g, &bs), &r),
        &ws,
        FD_STEP,
    );
    let gb = central_diff(
        |v| dot(&naive_dense(&xs, n, f, &ws, g, v), &r),
        &bs,
        FD_STEP,
    );
    max_rel_err(grads.input.data(), &gx)
        .max(max_rel_err(grads.weights.data(), &gw))
        .max(max_rel_err(grads.bias.data(), &gb))
}

/// Inputs are a shuffled ladder with spacing 0.01, so no 2×2 window has a
/// tie or a near-tie that the finite-difference step could flip.
pub fn maxpool_case(rng: &mut Rng) -> f64 {
    let shape = [
        1 + rng.below(2),
        1 + rng.below(4),
        2 * (1 + rng.below(3)),
        2 * (1 + rng.below(3)),
    ];
    let len: usize = shape.iter().product();
    let mut ladder: Vec<f32> = (0..len).map(|i| i as f32 * 0.01 - 0.5).collect();
    rng.shuffle(&mut ladder);
    let x = Tensor::from_vec(shape.to_vec(), ladder).unwrap();
    let (y, idx) = maxpool2x2_forward(&x).unwrap();
    let up = random_tensor(y.shape().to_vec(), -1.0, 1.0, rng);
    let r = to_f64(&up);
    let g = maxpool2x2_backward(&idx, &up).unwrap();
    let num = central_diff(|v| dot(&naive_maxpool(v, shape), &r), &to_f64(&x), FD_STEP);
    max_rel_err(g.data(), &num)
}

pub fn gap_case(rng: &mut Rng) -> f64 {
    let shape = [
        1 + rng.below(2),
        1 + rng.below(4),
        1 + rng.below(6),
        1 + rng.below(6),
    ];
    let x = random_tensor(shape.to_vec(), -1.0, 1.0, rng);
    let up = random_tensor(vec![shape[0], shape[1]], -1.0, 1.0, rng);
    let r = to_f64(&up);
    let g = global_avg_pool_backward(&shape, &up).unwrap();
    let num = central_diff(|v| dot(&naive_gap(v, shape), &r), &to_f64(&x), FD_STEP);
    max_rel_err(g.data(), &num)
}

pub fn softmax_case(rng: &mut Rng) -> f64 {
    let n = 1 + rng.below(4);
    let c = 2 + rng.below(9);
    let logits = random_tensor(vec![n, c], -3.0, 3.0, rng);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    let num = central_diff(
        |v| naive_softmax_ce(v, c, &labels),
        &to_f64(&logits),
        FD_STEP,
    );
    max_rel_err(g.data(), &num)
}

/// Activation backward with inputs kept 1e-2 away from every knot.
pub fn activation_case(kind: ActivationKind, rng: &mut Rng) -> f64 {
    let len = 1 + rng.below(24);
    let mut xs = Vec::with_capacity(len);
    while xs.len() < len {
        let x = rng.uniform_range(-8.0, 8.0);
        if !near_knot(x, 1e-2) {
            xs.push(x as f32);
        }
    }
    let x = Tensor::from_vec(vec![len], xs).unwrap();
    let up = random_tensor(vec![len], -1.0, 1.0, rng);
    let r = to_f64(&up);
    let g = activate_batch_backward(kind, &x, &up).unwrap();
    let num = central_diff(
        |v| {
            v.iter()
                .zip(&r)
                .map(|(&xv, rv)| ref_activation(kind, xv) * rv)
                .sum()
        },
        &to_f64(&x),
        FD_STEP,
    );
    max_rel_err(g.data(), &num)
}

// ---------------------------------------------------------------------------
// Whole-model composition oracle
// ---------------------------------------------------------------------------

/// Flat `f64` copies of a model's parameters, in allocation order.
pub fn model_params_f64(model: &Model) -> Vec<Vec<f64>> {
    model.params().iter().map(|p| to_f64(p)).collect()
}

/// Forward pass of `model`'s architecture composed from the naive oracles,
/// using the parameter values in `params` (allocation order).
pub fn model_forward_f64(
    model: &Model,
    params: &[Vec<f64>],
    x: &[f64],
    xshape: [usize; 4],
) -> Vec<f64> {
    let shapes: Vec<[usize; 4]> = model
        .params()
        .iter()
        .map(|p| {
            let s = p.shape();
            [
                s[0],
                *s.get(1).unwrap_or(&1),
                *s.get(2).unwrap_or(&1),
                *s.get(3).unwrap_or(&1),
            ]
        })
        .collect();
    let act = |kind: ActivationKind, v: Vec<f64>| -> Vec<f64> {
        v.into_iter().map(|z| ref_activation(kind, z)).collect()
    };

    let mut slot = 0;
    let (stem, mut shape) =
        naive_conv(x, xshape, &params[slot], shapes[slot], &params[slot + 1], 1);
    slot += 2;
    let mut cur = act(model.stem_act, stem);
    for block in &model.blocks {
        let (y1, s1) = naive_conv(
            &cur,
            shape,
            &params[slot],
            shapes[slot],
            &params[slot + 1],
            block.conv1.stride,
        );
        let a1 = act(block.act_a, y1);
        let (mut z, s2) = naive_conv(
            &a1,
            s1,
            &params[slot + 2],
            shapes[slot + 2],
            &params[slot + 3],
            1,
        );
        slot += 4;
        if block.proj.is_some() {
            let (p, _) = naive_conv(
                &cur,
                shape,
                &params[slot],
                shapes[slot],
                &params[slot + 1],
                block.conv1.stride,
            );
            slot += 2;
            z.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        } else {
            z.iter_mut().zip(&cur).for_each(|(a, b)| *a += b);
        }
        cur = act(block.act_b, z);
        shape = s2;
    }
    let pooled = naive_gap(&cur, shape);
    let g = shapes[slot][1];
    naive_dense(
        &pooled,
        shape[0],
        shape[1],
        &params[slot],
        g,
        &params[slot + 1],
    )
}

// ---------------------------------------------------------------------------
// Smoothing oracle
// ---------------------------------------------------------------------------

/// Centered moving average by explicit summation, `O(T·w·C)`. The window
/// holds `⌈(w−1)/2⌉` rows before `t` and `⌊(w−1)/2⌋` after, truncated at
/// the ends and divided by the rows actually present.
pub fn brute_sma(probs: &[f64], t_len: usize, c: usize, w: usize) -> Vec<f64> {
    let before = w / 2;
    let after = (w - 1) / 2;
    let mut out = vec![0.0; t_len * c];
    for t in 0..t_len {
        let lo = t as isize - before as isize;
        let hi = t + after;
        let mut count = 0;
        for s in 0..t_len {
            if (s as isize) < lo || s > hi {
                continue;
            }
            count += 1;
            for j in 0..c {
                out[t * c + j] += probs[s * c + j];
            }
        }
        for j in 0..c {
            out[t * c + j] /= count as f64;
        }
    }
    out
}
