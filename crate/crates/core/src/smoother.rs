//! Moving-average smoothing of per-frame class probabilities.
//!
//! Windows are centred with the extra frame on the left for even sizes:
//! frame `t` averages rows `t − ⌈(w−1)/2⌉ ..= t + ⌊(w−1)/2⌋`, truncated at
//! the sequence ends and divided by the number of rows actually covered.
//! Smoothing runs on probabilities; decoding happens afterwards.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::PhaseSequence;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSweepRow {
    pub w: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// One row per requested window, in request order.
    pub rows: Vec<WindowSweepRow>,
    /// Index into `rows` of the most accurate window (first on ties).
    pub best: usize,
}

impl SweepResult {
    pub fn best_row(&self) -> WindowSweepRow {
        self.rows[self.best]
    }

    pub fn accuracy_at(&self, w: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.w == w).map(|r| r.accuracy)
    }
}

/// Rows covered by the window around frame `t`, as a half-open range.
pub fn window_bounds(t: usize, frames: usize, w: usize) -> (usize, usize) {
    let left = w / 2; // ⌈(w−1)/2⌉
    let right = (w - 1) / 2;
    (t.saturating_sub(left), (t + right + 1).min(frames))
}

/// Sliding-sum moving average over the rows of a `T × C` matrix.
pub fn sma(probs: &Tensor, w: usize) -> Result<Tensor> {
    if w < 1 {
        return Err(Error::Domain("window size must be at least 1".into()));
    }
    probs.expect_rank(2, "sma input")?;
    let (t_len, c) = (probs.shape()[0], probs.shape()[1]);
    if w == 1 {
        return Ok(probs.clone());
    }
    // prefix[t*c + j] = sum of rows 0..t in column j
    let mut prefix = vec![0.0f64; (t_len + 1) * c];
    for (t, row) in probs.data().chunks_exact(c).enumerate() {
        for j in 0..c {
            prefix[(t + 1) * c + j] = prefix[t * c + j] + row[j] as f64;
        }
    }
    let mut out = Vec::with_capacity(t_len * c);
    for t in 0..t_len {
        let (lo, hi) = window_bounds(t, t_len, w);
        let count = (hi - lo) as f64;
        for j in 0..c {
            out.push(((prefix[hi * c + j] - prefix[lo * c + j]) / count) as f32);
        }
    }
    Tensor::from_vec(vec![t_len, c], out)
}

/// Per-row argmax; ties go to the lowest class index.
pub fn argmax_decode(probs: &Tensor) -> Result<Vec<usize>> {
    probs.expect_rank(2, "argmax_decode input")?;
    let c = probs.shape()[1];
    Ok(probs
        .data()
        .chunks_exact(c)
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

pub fn frame_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} frames",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Domain("accuracy of an empty sequence".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn sweep_window(seq: &PhaseSequence, windows: &[usize]) -> Result<SweepResult> {
    if windows.is_empty() {
        return Err(Error::Domain(
            "window sweep needs at least one window".into(),
        ));
    }
    let mut rows = Vec::with_capacity(windows.len());
    for &w in windows {
        let pred = argmax_decode(&sma(seq.probs(), w)?)?;
        rows.push(WindowSweepRow {
            w,
            accuracy: frame_accuracy(&pred, seq.truth())?,
        });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.accuracy > rows[best].accuracy {
            best = i;
        }
    }
    Ok(SweepResult { rows, best })
}

/// Writes `w,accuracy` CSV.
pub fn write_sweep_csv(rows: &[WindowSweepRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "w,accuracy")?;
    for r in rows {
        writeln!(out, "{},{}", r.w, r.accuracy)?;
    }
    Ok(())
}

pub fn save_sweep_csv(rows: &[WindowSweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_sweep_csv(rows, &mut buf).map_err(|e| Error::io(path, e))?;
    buf.flush().map_err(|e| Error::io(path, e))
}
