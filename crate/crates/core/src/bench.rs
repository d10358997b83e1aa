//! Throughput microbenchmarks for the activation kernels.
//!
//! Inputs are seeded uniforms in `[−6, 6]` so every knot is crossed. Each
//! run does two untimed warmup passes, then times `repeats` full passes of
//! [`activate_slice`] with a monotonic clock and reports the median. The
//! output of every pass is summed outside the timed region so the work
//! cannot be optimized away. Keep the machine otherwise idle while timing.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{activate_slice, ActivationKind};
use crate::tensor::Rng;

pub const MIN_ELEMENTS: usize = 1_000_000;
pub const MIN_REPEATS: usize = 3;
const WARMUP_PASSES: usize = 2;
const INPUT_RANGE: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub kind: ActivationKind,
    pub n_elements: usize,
    pub repeats: usize,
    pub median_ns_per_element: f64,
    /// Sum of one pass's outputs, accumulated in `f64`.
    pub checksum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub results: Vec<BenchResult>,
    /// `median(kind) / median(relu)` for each entry of `results`.
    pub ratio_vs_relu: Vec<f64>,
}

/// Median of a non-empty sample; even lengths average the middle pair.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// The benchmark input buffer for `seed`.
pub fn bench_input(n_elements: usize, seed: u64) -> Vec<f32> {
    let mut rng = Rng::new(seed);
    (0..n_elements)
        .map(|_| rng.uniform_range(-INPUT_RANGE, INPUT_RANGE) as f32)
        .collect()
}

pub fn checksum(values: &[f32]) -> f64 {
    values.iter().map(|&v| v as f64).sum()
}

/// Per-repeat wall times in nanoseconds plus the checksum; exposed so the
/// median can be checked against the raw samples.
pub fn time_passes(kind: ActivationKind, input: &[f32], repeats: usize) -> (Vec<f64>, f64) {
    let mut out = vec![0.0f32; input.len()];
    for _ in 0..WARMUP_PASSES {
        activate_slice(kind, black_box(input), &mut out);
        black_box(&out);
    }
    let sum = checksum(&out);
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        activate_slice(kind, black_box(input), &mut out);
        black_box(&mut out);
        samples.push(start.elapsed().as_nanos() as f64);
        // Deterministic kernel: every pass must reproduce the warmup sum.
        let pass = black_box(checksum(&out));
        debug_assert_eq!(pass.to_bits(), sum.to_bits());
    }
    (samples, sum)
}

pub fn bench_activation(
    kind: ActivationKind,
    n_elements: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchResult> {
    if n_elements < MIN_ELEMENTS {
        return Err(Error::Domain(format!(
            "benchmark needs at least {MIN_ELEMENTS} elements, got {n_elements}"
        )));
    }
    if repeats < MIN_REPEATS {
        return Err(Error::Domain(format!(
            "benchmark needs at least {MIN_REPEATS} repeats, got {repeats}"
        )));
    }
    let input = bench_input(n_elements, seed);
    let (samples, checksum) = time_passes(kind, &input, repeats);
    let median_total = median(&samples).expect("repeats >= 3");
    Ok(BenchResult {
        kind,
        n_elements,
        repeats,
        // Timer granularity can report zero for very fast passes.
        median_ns_per_element: median_total.max(1.0) / n_elements as f64,
        checksum,
    })
}

/// Benchmarks `kinds` in order. ReLU is timed as the reference even when it
/// is not in the list.
pub fn compare(
    kinds: &[ActivationKind],
    n_elements: usize,
    repeats: usize,
    seed: u64,
) -> Result<Comparison> {
    if kinds.is_empty() {
        return Err(Error::Domain("nothing to benchmark".into()));
    }
    let mut results = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        results.push(bench_activation(kind, n_elements, repeats, seed)?);
    }
    let relu = match results.iter().find(|r| r.kind == ActivationKind::Relu) {
        Some(r) => r.median_ns_per_element,
        None => {
            bench_activation(ActivationKind::Relu, n_elements, repeats, seed)?.median_ns_per_element
        }
    };
    let ratio_vs_relu = results
        .iter()
        .map(|r| r.median_ns_per_element / relu)
        .collect();
    Ok(Comparison {
        results,
        ratio_vs_relu,
    })
}

/// Writes `kind,n,repeats,median_ns_per_elem,ratio_vs_relu` CSV.
pub fn write_comparison_csv(cmp: &Comparison, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "kind,n,repeats,median_ns_per_elem,ratio_vs_relu")?;
    for (r, ratio) in cmp.results.iter().zip(&cmp.ratio_vs_relu) {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.kind, r.n_elements, r.repeats, r.median_ns_per_element, ratio
        )?;
    }
    Ok(())
}

pub fn save_comparison_csv(cmp: &Comparison, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_comparison_csv(cmp, &mut file).map_err(|e| Error::io(path, e))
}
