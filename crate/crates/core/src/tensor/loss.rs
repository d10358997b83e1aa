use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over the batch, with its gradient
/// `(softmax − onehot) / N` with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f32, Tensor)> {
    logits.expect_rank(2, "softmax_cross_entropy logits")?;
    let (n, c) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} rows of logits",
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange { label, classes: c });
    }
    let mut grad = Vec::with_capacity(n * c);
    let mut total = 0.0f64;
    for (row, &label) in logits.data().chunks_exact(c).zip(labels) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let exps: Vec<f64> = row.iter().map(|&z| ((z - max) as f64).exp()).collect();
        let sum: f64 = exps.iter().sum();
        total += sum.ln() - (row[label] - max) as f64;
        for (j, e) in exps.iter().enumerate() {
            let onehot = if j == label { 1.0 } else { 0.0 };
            grad.push(((e / sum - onehot) / n as f64) as f32);
        }
    }
    Ok((
        (total / n as f64) as f32,
        Tensor::from_vec(vec![n, c], grad)?,
    ))
}
