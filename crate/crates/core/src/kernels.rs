//! Activation functions, their derivatives, and an approximation-error scan.
//!
//! Public kernels work on `f32`. [`max_approx_error`] evaluates in `f64` so it
//! can serve as a reference for the `f32` paths.
//!
//! Derivatives at the knots follow a fixed interval rule:
//!
//! | kind      | rule                                                  |
//! |-----------|-------------------------------------------------------|
//! | ReLU      | `x > 0 → 1`, else `0` (so `0` at the knot)            |
//! | ReLU6     | `0 < x < 6 → 1`, else `0`                             |
//! | Hard-Swish| `x ≤ −3 → 0`, `−3 < x ≤ 3 → (2x+3)/6`, `x > 3 → 1`   |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Relu6,
    Sigmoid,
    Swish,
    HardSwish,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::Relu,
        ActivationKind::Relu6,
        ActivationKind::Sigmoid,
        ActivationKind::Swish,
        ActivationKind::HardSwish,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Relu6 => "relu6",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Swish => "swish",
            ActivationKind::HardSwish => "hardswish",
        }
    }

    /// Forward value without input validation. Callers on hot paths must
    /// guarantee a finite `x`.
    #[inline]
    pub fn forward(self, x: f32) -> f32 {
        match self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            ActivationKind::Relu6 => relu6(x),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Swish => x * sigmoid(x),
            ActivationKind::HardSwish => hard_swish(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f32) -> f32 {
        match self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Relu6 => {
                if x > 0.0 && x < 6.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Swish => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            ActivationKind::HardSwish => {
                if x <= -3.0 {
                    0.0
                } else if x <= 3.0 {
                    (2.0 * x + 3.0) / 6.0
                } else {
                    1.0
                }
            }
        }
    }

    /// `f64` evaluation used by the approximation analyzer.
    pub fn forward_f64(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Relu6 => x.clamp(0.0, 6.0),
            ActivationKind::Sigmoid => sigmoid_f64(x),
            ActivationKind::Swish => x * sigmoid_f64(x),
            ActivationKind::HardSwish => x * ((x + 3.0) / 6.0).clamp(0.0, 1.0),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "relu" => Ok(ActivationKind::Relu),
            "relu6" => Ok(ActivationKind::Relu6),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "swish" | "silu" => Ok(ActivationKind::Swish),
            "hardswish" => Ok(ActivationKind::HardSwish),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

#[inline]
fn relu6(x: f32) -> f32 {
    x.clamp(0.0, 6.0)
}

/// Select-only form so the slice loop vectorizes. The gate clamps to
/// exactly 0 or 1 in the tails, and `+ 0.0` turns the `-0.0` of the left
/// tail into `+0.0`.
#[inline]
fn hard_swish(x: f32) -> f32 {
    let gate = (x + 3.0) / 6.0;
    let gate = if gate < 0.0 { 0.0 } else { gate };
    let gate = if gate > 1.0 { 1.0 } else { gate };
    x * gate + 0.0
}

/// Logistic sigmoid; the negative branch uses `e^x / (1 + e^x)` so large
/// magnitudes never overflow.
#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(x: f32) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite activation input {x}")))
    }
}

pub fn activate(kind: ActivationKind, x: f32) -> Result<f32> {
    check_finite(x)?;
    Ok(kind.forward(x))
}

pub fn activate_derivative(kind: ActivationKind, x: f32) -> Result<f32> {
    check_finite(x)?;
    Ok(kind.derivative(x))
}

/// Single-pass elementwise kernel over a contiguous buffer. This is the loop
/// the throughput benchmark times; it does not validate its input.
///
/// Panics if the slices differ in length.
pub fn activate_slice(kind: ActivationKind, xs: &[f32], out: &mut [f32]) {
    assert_eq!(xs.len(), out.len(), "activate_slice length mismatch");
    // One monomorphic loop per kind keeps the match out of the inner loop.
    macro_rules! map {
        ($f:expr) => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = $f(x);
            }
        };
    }
    match kind {
        ActivationKind::Relu => map!(|x| ActivationKind::Relu.forward(x)),
        ActivationKind::Relu6 => map!(relu6),
        ActivationKind::Sigmoid => map!(sigmoid),
        ActivationKind::Swish => map!(|x| ActivationKind::Swish.forward(x)),
        ActivationKind::HardSwish => map!(hard_swish),
    }
}

pub fn activate_batch(kind: ActivationKind, xs: &Tensor) -> Result<Tensor> {
    if let Some(bad) = xs.data().iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite activation input {bad}")));
    }
    let mut out = vec![0.0; xs.len()];
    activate_slice(kind, xs.data(), &mut out);
    Tensor::from_vec(xs.shape().to_vec(), out)
}

/// `upstream · f'(x)` elementwise.
pub fn activate_batch_backward(
    kind: ActivationKind,
    xs: &Tensor,
    upstream: &Tensor,
) -> Result<Tensor> {
    if xs.shape() != upstream.shape() {
        return Err(Error::Shape(format!(
            "activation backward: input {:?} vs upstream {:?}",
            xs.shape(),
            upstream.shape()
        )));
    }
    let mut out = Vec::with_capacity(xs.len());
    for (&x, &g) in xs.data().iter().zip(upstream.data()) {
        check_finite(x)?;
        out.push(g * kind.derivative(x));
    }
    Tensor::from_vec(xs.shape().to_vec(), out)
}

/// Location and size of the largest gap between two activations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxError {
    pub x_at_max: f64,
    pub err: f64,
}

/// Scans `lo, lo+step, …, ≤ hi` in `f64` and returns the first grid point
/// where `|a(x) − b(x)|` is largest.
pub fn max_approx_error(
    a: ActivationKind,
    b: ActivationKind,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<ApproxError> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || lo >= hi || step <= 0.0 {
        return Err(Error::Domain(format!(
            "empty grid: lo={lo}, hi={hi}, step={step}"
        )));
    }
    // Tolerate representation error so that `hi` itself lands on the grid.
    let count = ((hi - lo) / step * (1.0 + 1e-12)).floor() as u64 + 1;
    let mut best = ApproxError {
        x_at_max: lo,
        err: -1.0,
    };
    for i in 0..count {
        let x = lo + i as f64 * step;
        let err = (a.forward_f64(x) - b.forward_f64(x)).abs();
        if err > best.err {
            best = ApproxError { x_at_max: x, err };
        }
    }
    Ok(best)
}
