use sha2::{Digest, Sha256};

use super::{ModelSpec, INPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::kernels::{activate_batch, activate_batch_backward, ActivationKind};
use crate::tensor::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, global_avg_pool,
    global_avg_pool_backward, he_init, Rng, Tensor,
};

const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Tensor,
    pub stride: usize,
}

impl ConvParams {
    fn init(in_ch: usize, out_ch: usize, k: usize, stride: usize, rng: &mut Rng) -> Result<Self> {
        Ok(ConvParams {
            weights: he_init(vec![out_ch, in_ch, k, k], in_ch * k * k, rng)?,
            bias: Tensor::zeros(vec![out_ch]),
            stride,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv2d_forward(x, &self.weights, &self.bias, self.stride)
    }
}

/// `out = act_b(conv2(act_a(conv1(x))) + skip(x))`, where `skip` is a 1×1
/// strided projection when the shape changes and the identity otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    pub proj: Option<ConvParams>,
    pub act_a: ActivationKind,
    pub act_b: ActivationKind,
}

/// Intermediate values kept from a training forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Tensor,
    stem_pre: Tensor,
    blocks: Vec<BlockTrace>,
    features_shape: Vec<usize>,
    pooled: Tensor,
}

#[derive(Debug, Clone)]
struct BlockTrace {
    input: Tensor,
    pre_a: Tensor,
    post_a: Tensor,
    pre_b: Tensor,
}

/// Executable model: parameters plus the plan derived from a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    pub stem: ConvParams,
    pub stem_act: ActivationKind,
    pub blocks: Vec<Block>,
    pub head_weights: Tensor,
    pub head_bias: Tensor,
}

impl Model {
    /// Allocates parameters in the fixed order stem, stage 1…4, head. The
    /// random stream never depends on activation kinds.
    pub fn build(spec: &ModelSpec, rng: &mut Rng) -> Result<Model> {
        spec.validate()?;
        let stem = ConvParams::init(INPUT_CHANNELS, spec.stem.channels, KERNEL, 1, rng)?;
        let mut blocks = Vec::with_capacity(spec.num_blocks());
        let mut in_ch = spec.stem.channels;
        for stage in &spec.stages {
            for b in &stage.blocks {
                let conv1 = ConvParams::init(in_ch, b.channels, KERNEL, b.stride, rng)?;
                let conv2 = ConvParams::init(b.channels, b.channels, KERNEL, 1, rng)?;
                let proj = if in_ch != b.channels || b.stride != 1 {
                    Some(ConvParams::init(in_ch, b.channels, 1, b.stride, rng)?)
                } else {
                    None
                };
                blocks.push(Block {
                    conv1,
                    conv2,
                    proj,
                    act_a: b.act_a,
                    act_b: b.act_b,
                });
                in_ch = b.channels;
            }
        }
        let head_weights = he_init(vec![in_ch, spec.head.classes], in_ch, rng)?;
        let head_bias = Tensor::zeros(vec![spec.head.classes]);
        Ok(Model {
            spec: spec.clone(),
            stem,
            stem_act: spec.stem.act,
            blocks,
            head_weights,
            head_bias,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn head_features(&self) -> usize {
        self.head_weights.shape()[0]
    }

    pub fn num_classes(&self) -> usize {
        self.head_weights.shape()[1]
    }

    /// Parameters in allocation order; gradients from [`Model::backward`]
    /// follow the same order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.stem.weights, &self.stem.bias];
        for b in &self.blocks {
            out.extend([
                &b.conv1.weights,
                &b.conv1.bias,
                &b.conv2.weights,
                &b.conv2.bias,
            ]);
            if let Some(p) = &b.proj {
                out.extend([&p.weights, &p.bias]);
            }
        }
        out.extend([&self.head_weights, &self.head_bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.stem.weights, &mut self.stem.bias];
        for b in &mut self.blocks {
            out.extend([
                &mut b.conv1.weights,
                &mut b.conv1.bias,
                &mut b.conv2.weights,
                &mut b.conv2.bias,
            ]);
            if let Some(p) = &mut b.proj {
                out.extend([&mut p.weights, &mut p.bias]);
            }
        }
        out.extend([&mut self.head_weights, &mut self.head_bias]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// SHA-256 over parameter shapes and raw `f32` bits, hex encoded.
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in self.params() {
            for &d in p.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for &v in p.data() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        batch.expect_rank(4, "model input")?;
        if batch.shape()[1] != INPUT_CHANNELS {
            return Err(Error::Shape(format!(
                "model input needs {INPUT_CHANNELS} channels, got {:?}",
                batch.shape()
            )));
        }
        Ok(())
    }

    /// Logits `N × classes`. Never mutates the model.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut x = activate_batch(self.stem_act, &self.stem.forward(batch)?)?;
        for b in &self.blocks {
            let a = activate_batch(b.act_a, &b.conv1.forward(&x)?)?;
            let mut z = b.conv2.forward(&a)?;
            match &b.proj {
                Some(p) => z.add_assign(&p.forward(&x)?)?,
                None => z.add_assign(&x)?,
            }
            x = activate_batch(b.act_b, &z)?;
        }
        let pooled = global_avg_pool(&x)?;
        dense_forward(&pooled, &self.head_weights, &self.head_bias)
    }

    /// Forward pass that keeps what [`Model::backward`] needs.
    pub fn forward_train(&self, batch: &Tensor) -> Result<(Tensor, Trace)> {
        self.check_input(batch)?;
        let stem_pre = self.stem.forward(batch)?;
        let mut x = activate_batch(self.stem_act, &stem_pre)?;
        let mut traces = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let pre_a = b.conv1.forward(&x)?;
            let post_a = activate_batch(b.act_a, &pre_a)?;
            let mut pre_b = b.conv2.forward(&post_a)?;
            match &b.proj {
                Some(p) => pre_b.add_assign(&p.forward(&x)?)?,
                None => pre_b.add_assign(&x)?,
            }
            let out = activate_batch(b.act_b, &pre_b)?;
            traces.push(BlockTrace {
                input: x,
                pre_a,
                post_a,
                pre_b,
            });
            x = out;
        }
        let pooled = global_avg_pool(&x)?;
        let logits = dense_forward(&pooled, &self.head_weights, &self.head_bias)?;
        let trace = Trace {
            input: batch.clone(),
            stem_pre,
            blocks: traces,
            features_shape: x.shape().to_vec(),
            pooled,
        };
        Ok((logits, trace))
    }

    /// Gradients of the loss with respect to every parameter, given the
    /// gradient with respect to the logits.
    pub fn backward(&self, trace: &Trace, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let head = dense_backward(&trace.pooled, &self.head_weights, grad_logits)?;
        let mut g = global_avg_pool_backward(&trace.features_shape, &head.input)?;

        // Filled back to front, then reversed into allocation order.
        let mut block_grads: Vec<Vec<Tensor>> = Vec::with_capacity(self.blocks.len());
        for (b, t) in self.blocks.iter().zip(&trace.blocks).rev() {
            let g_z = activate_batch_backward(b.act_b, &t.pre_b, &g)?;
            let c2 = conv2d_backward(&t.post_a, &b.conv2.weights, &g_z, 1)?;
            let g_a = activate_batch_backward(b.act_a, &t.pre_a, &c2.input)?;
            let c1 = conv2d_backward(&t.input, &b.conv1.weights, &g_a, b.conv1.stride)?;
            let mut g_in = c1.input;
            let mut grads = vec![c1.weights, c1.bias, c2.weights, c2.bias];
            match &b.proj {
                Some(p) => {
                    let cp = conv2d_backward(&t.input, &p.weights, &g_z, p.stride)?;
                    g_in.add_assign(&cp.input)?;
                    grads.extend([cp.weights, cp.bias]);
                }
                None => g_in.add_assign(&g_z)?,
            }
            block_grads.push(grads);
            g = g_in;
        }

        let g_stem = activate_batch_backward(self.stem_act, &trace.stem_pre, &g)?;
        let stem = conv2d_backward(&trace.input, &self.stem.weights, &g_stem, 1)?;

        let mut out = vec![stem.weights, stem.bias];
        for grads in block_grads.into_iter().rev() {
            out.extend(grads);
        }
        out.extend([head.weights, head.bias]);
        Ok(out)
    }
}
