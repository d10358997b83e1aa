//! Per-frame phase probabilities and their CSV form
//! (`frame,truth,p0,…,p{C-1}`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

const ROW_SUM_TOLERANCE: f64 = 1e-3;
const STOCHASTIC_TOLERANCE: f32 = 1e-5;

/// `T × C` row-stochastic probabilities plus the true phase of each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSequence {
    probs: Tensor,
    truth: Vec<usize>,
}

impl PhaseSequence {
    pub fn new(probs: Tensor, truth: Vec<usize>) -> Result<Self> {
        probs.expect_rank(2, "phase probabilities")?;
        let (t, c) = (probs.shape()[0], probs.shape()[1]);
        if truth.len() != t {
            return Err(Error::Shape(format!(
                "{} truth labels for {t} frames",
                truth.len()
            )));
        }
        if let Some(&label) = truth.iter().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        for (i, row) in probs.data().chunks_exact(c).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Domain(format!(
                    "frame {i}: probabilities must be finite and nonnegative"
                )));
            }
            let sum: f32 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::Domain(format!(
                    "frame {i}: probabilities sum to {sum}"
                )));
            }
        }
        Ok(PhaseSequence { probs, truth })
    }

    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    pub fn frames(&self) -> usize {
        self.truth.len()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.shape()[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGenConfig {
    pub num_phases: usize,
    pub segment_len: usize,
    pub frames: usize,
    /// Probability that a frame's predicted phase is wrong.
    pub noise: f64,
    /// Mass spread evenly over the phases other than the predicted one.
    pub confusion_spread: f64,
    pub seed: u64,
}

impl Default for PhaseGenConfig {
    fn default() -> Self {
        PhaseGenConfig {
            num_phases: 10,
            segment_len: 200,
            frames: 2000,
            noise: 0.25,
            confusion_spread: 0.2,
            seed: 7,
        }
    }
}

/// Truth cycles through the phases in segments of `segment_len` frames.
/// Each frame draws a predicted phase (the truth with probability
/// `1 − noise`, otherwise uniform over the rest) and emits a row with
/// `1 − confusion_spread` on the prediction.
pub fn gen_synthetic_phases(cfg: &PhaseGenConfig) -> Result<PhaseSequence> {
    let c = cfg.num_phases;
    if c < 2 {
        return Err(Error::Domain(format!("need at least 2 phases, got {c}")));
    }
    if cfg.segment_len < 1 {
        return Err(Error::Domain("segment length must be at least 1".into()));
    }
    if cfg.frames < 1 {
        return Err(Error::Domain("need at least one frame".into()));
    }
    if !(0.0..1.0).contains(&cfg.noise) {
        return Err(Error::Domain(format!("noise {} outside [0, 1)", cfg.noise)));
    }
    if !(0.0..1.0).contains(&cfg.confusion_spread) {
        return Err(Error::Domain(format!(
            "confusion spread {} outside [0, 1)",
            cfg.confusion_spread
        )));
    }

    let mut rng = Rng::new(cfg.seed);
    let off = (cfg.confusion_spread / (c - 1) as f64) as f32;
    let on = (1.0 - cfg.confusion_spread) as f32;
    let mut probs = Vec::with_capacity(cfg.frames * c);
    let mut truth = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let label = (t / cfg.segment_len) % c;
        let predicted = if rng.next_uniform() < cfg.noise {
            let other = rng.below(c - 1);
            if other >= label {
                other + 1
            } else {
                other
            }
        } else {
            label
        };
        probs.extend((0..c).map(|j| if j == predicted { on } else { off }));
        truth.push(label);
    }
    PhaseSequence::new(Tensor::from_vec(vec![cfg.frames, c], probs)?, truth)
}

pub fn save_phase_csv(seq: &PhaseSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    let c = seq.num_classes();
    let mut header = vec!["frame".to_string(), "truth".to_string()];
    header.extend((0..c).map(|j| format!("p{j}")));
    w.write_record(&header)?;
    for (t, (row, truth)) in seq.probs.data().chunks_exact(c).zip(&seq.truth).enumerate() {
        let mut rec = vec![t.to_string(), truth.to_string()];
        rec.extend(row.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses a phase CSV. Rows must sum to 1 within 1e-3 and are then
/// renormalized to sum to 1.
pub fn load_phase_csv(path: impl AsRef<Path>) -> Result<PhaseSequence> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = r.headers()?.clone();
    if header.is_empty() {
        return Err(Error::parse(path, "empty file"));
    }
    let c = header.len().saturating_sub(2);
    let header_ok = c >= 2
        && &header[0] == "frame"
        && &header[1] == "truth"
        && (0..c).all(|j| header[2 + j] == format!("p{j}"));
    if !header_ok {
        return Err(Error::parse(
            path,
            "header must be frame,truth,p0,…,p{C-1} with C ≥ 2",
        ));
    }

    let mut probs = Vec::new();
    let mut truth = Vec::new();
    for (t, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = t + 2;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let frame: usize = field(0).parse().map_err(|_| {
            Error::parse(path, format!("line {line}: bad frame index `{}`", field(0)))
        })?;
        if frame != t {
            return Err(Error::parse(
                path,
                format!("line {line}: expected frame {t}, found {frame}"),
            ));
        }
        let label: usize = field(1).parse().map_err(|_| {
            Error::parse(path, format!("line {line}: bad truth label `{}`", field(1)))
        })?;
        if label >= c {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let mut row = Vec::with_capacity(c);
        for j in 0..c {
            let p: f64 = field(2 + j).parse().map_err(|_| {
                Error::parse(
                    path,
                    format!("line {line}: bad probability `{}`", field(2 + j)),
                )
            })?;
            if !p.is_finite() || p < 0.0 {
                return Err(Error::parse(
                    path,
                    format!("line {line}: probability {p} out of range"),
                ));
            }
            row.push(p);
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::parse(
                path,
                format!("line {line}: probabilities sum to {sum}"),
            ));
        }
        probs.extend(row.iter().map(|p| (p / sum) as f32));
        truth.push(label);
    }
    if truth.is_empty() {
        return Err(Error::parse(path, "no frames"));
    }
    PhaseSequence::new(Tensor::from_vec(vec![truth.len(), c], probs)?, truth)
}
