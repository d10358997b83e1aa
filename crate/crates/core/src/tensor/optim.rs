use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One SGD-with-momentum update: `v ← momentum·v + g`, `p ← p − lr·v`.
pub fn sgd_momentum_step(
    params: &mut Tensor,
    grads: &Tensor,
    velocity: &mut Tensor,
    lr: f32,
    momentum: f32,
) -> Result<()> {
    grads.expect_shape(params.shape(), "sgd grads")?;
    velocity.expect_shape(params.shape(), "sgd velocity")?;
    for ((p, v), &g) in params
        .data_mut()
        .iter_mut()
        .zip(velocity.data_mut())
        .zip(grads.data())
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Momentum SGD over an ordered parameter list.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new<'a>(lr: f32, momentum: f32, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let velocity = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape().to_vec()))
            .collect();
        Sgd {
            lr,
            momentum,
            velocity,
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::Shape(format!(
                "sgd: {} params and {} grads for {} slots",
                params.len(),
                grads.len(),
                self.velocity.len()
            )));
        }
        for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            sgd_momentum_step(p, g, v, self.lr, self.momentum)?;
        }
        Ok(())
    }
}
