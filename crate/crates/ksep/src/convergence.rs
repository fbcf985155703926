//! Convergence-curve bookkeeping: turns per-worker event logs into a single
//! normalized, geometrically averaged curve suitable for plotting. Sizes are
//! carried as f64 because averaging repetitions produces fractional values.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConvergenceError {
    #[error("sequence not sorted by timestamp at index {0}")]
    Unsorted(usize),
    #[error("normalization time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("instance {0} has an empty sequence")]
    EmptyInstance(String),
    #[error("instance {0} has a non-positive size {1}; geometric mean undefined")]
    NonPositiveSize(String, f64),
}

/// A (timestamp, separator size) pair.
pub type Point = (f64, f64);

/// Running minimum over the sizes of a time-sorted sequence.
pub fn min_prefix(seq: &[Point]) -> Result<Vec<Point>, ConvergenceError> {
    let mut out = Vec::with_capacity(seq.len());
    let mut best = f64::INFINITY;
    for (i, &(t, size)) in seq.iter().enumerate() {
        if i > 0 && t < seq[i - 1].0 {
            return Err(ConvergenceError::Unsorted(i));
        }
        best = best.min(size);
        out.push((t, best));
    }
    Ok(out)
}

/// Divides every timestamp by the reference time `t_i` (the average
/// sequential solve time), yielding normalized time t_n = t / t_i.
pub fn normalize(seq: &[Point], t_i: f64) -> Result<Vec<Point>, ConvergenceError> {
    if t_i <= 0.0 {
        return Err(ConvergenceError::NonPositiveTime(t_i));
    }
    Ok(seq.iter().map(|&(t, s)| (t / t_i, s)).collect())
}

/// Averages repeated runs of the same instance pointwise: the i-th events of
/// all repetitions are combined into (mean t, mean size). Repetitions of
/// unequal length are truncated to the shortest. Applied before min_prefix.
pub fn average_repetitions(reps: &[Vec<Point>]) -> Vec<Point> {
    if reps.is_empty() {
        return Vec::new();
    }
    let len = reps.iter().map(|r| r.len()).min().unwrap_or(0);
    let n = reps.len() as f64;
    (0..len)
        .map(|i| {
            let (t_sum, s_sum) = reps
                .iter()
                .fold((0.0, 0.0), |(t, s), r| (t + r[i].0, s + r[i].1));
            (t_sum / n, s_sum / n)
        })
        .collect()
}

/// Event-based geometric mean over instances. Every instance's contribution
/// starts at its first value (so the mean is defined before its first event),
/// then the merged event sequence is swept in timestamp order: each event
/// replaces its instance's contribution and emits the updated mean.
pub fn event_geomean(
    per_instance: &BTreeMap<String, Vec<Point>>,
) -> Result<Vec<Point>, ConvergenceError> {
    let mut names = Vec::new();
    let mut current = Vec::new();
    let mut merged: Vec<(f64, f64, usize)> = Vec::new();
    for (idx, (name, seq)) in per_instance.iter().enumerate() {
        if seq.is_empty() {
            return Err(ConvergenceError::EmptyInstance(name.clone()));
        }
        for (i, &(t, size)) in seq.iter().enumerate() {
            if size <= 0.0 {
                return Err(ConvergenceError::NonPositiveSize(name.clone(), size));
            }
            if i > 0 && t < seq[i - 1].0 {
                return Err(ConvergenceError::Unsorted(i));
            }
            merged.push((t, size, idx));
        }
        names.push(name.clone());
        current.push(seq[0].1);
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let n = current.len() as f64;
    let mut out = Vec::with_capacity(merged.len());
    for (t, size, idx) in merged {
        current[idx] = size;
        let g = (current.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
        out.push((t, g));
    }
    Ok(out)
}

/// Writes a curve as tab-separated (t_n, G) lines.
pub fn write_tsv<W: std::io::Write>(curve: &[Point], mut out: W) -> std::io::Result<()> {
    for &(t, g) in curve {
        writeln!(out, "{t}\t{g}")?;
    }
    Ok(())
}
