//! Synthetic records with known R-peak positions.
//!
//! [`phantom_ecg`] builds beats out of triangles, so the signal is exactly
//! piecewise linear and its second difference is sparse.
//! [`gaussian_ecg`] sums Gaussian P/Q/R/S/T waves over a wandering
//! baseline for a smoother, more realistic MLII-like trace.

use std::path::Path;

use rand::Rng;

use super::ingest::{encode_212, EcgRecord, MIT_BASELINE, MIT_GAIN};
use crate::{rng, Result};

/// Adds a triangle of height `amp` peaking at `center` with the given
/// half-width (in samples).
/// Apex and feet are snapped to whole samples so each triangle adds exactly
/// three nonzeros to the second difference.
fn add_triangle(x: &mut [f64], center: f64, half_width: f64, amp: f64) {
    let (center, half_width) = (center.round(), half_width.round().max(1.0));
    let lo = (center - half_width).floor().max(0.0) as usize;
    let hi = ((center + half_width).ceil() as usize).min(x.len().saturating_sub(1));
    for (i, xi) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let d = (i as f64 - center).abs();
        if d < half_width {
            *xi += amp * (1.0 - d / half_width);
        }
    }
}

fn add_gaussian(x: &mut [f64], center: f64, sigma: f64, amp: f64) {
    let reach = (5.0 * sigma).ceil();
    let lo = (center - reach).max(0.0) as usize;
    let hi = ((center + reach) as usize).min(x.len().saturating_sub(1));
    for (i, xi) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let t = (i as f64 - center) / sigma;
        *xi += amp * (-0.5 * t * t).exp();
    }
}

/// R-peak positions for a rhythm of `bpm` with +-3% RR jitter; the first
/// beat lands 0.4 s in, the last at least 0.5 s before the end.
fn beat_positions(len: usize, fs: f64, bpm: f64, rng: &mut impl Rng) -> Vec<usize> {
    let rr = 60.0 / bpm * fs;
    let mut out = Vec::new();
    let mut t = 0.4 * fs;
    while t + 0.5 * fs < len as f64 {
        out.push(t.round() as usize);
        t += rr * rng.gen_range(0.97..1.03);
    }
    out
}

/// Piecewise-linear ECG-like record in mV with annotations at the R apexes.
pub fn phantom_ecg(duration_s: f64, fs: f64, bpm: f64, seed: u64) -> EcgRecord {
    let len = (duration_s * fs).round() as usize;
    let mut rng = rng::rng(seed);
    let beats = beat_positions(len, fs, bpm, &mut rng);
    let mut x = vec![0.0; len];
    for &r in &beats {
        let r = r as f64;
        let amp: f64 = rng.gen_range(0.95..1.05);
        add_triangle(&mut x, r - 0.20 * fs, 0.05 * fs, 0.12);
        add_triangle(&mut x, r - 0.05 * fs, 0.025 * fs, -0.10);
        add_triangle(&mut x, r, 0.04 * fs, amp);
        add_triangle(&mut x, r + 0.05 * fs, 0.025 * fs, -0.20);
        add_triangle(&mut x, r + 0.30 * fs, 0.10 * fs, 0.25);
    }
    EcgRecord::new(x, fs, 11)
        .and_then(|rec| rec.with_annotations(beats))
        .expect("phantom record is well formed")
}

/// A random length-`n` signal in `[-amplitude, amplitude]` whose second
/// difference has at most `kinks` nonzeros.
pub fn piecewise_linear(n: usize, kinks: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::rng(seed);
    let mut slope_changes = vec![0.0; n];
    for _ in 0..if n >= 3 { kinks } else { 0 } {
        let i = rng.gen_range(1..n - 1);
        slope_changes[i] += rng.gen_range(-1.0..1.0);
    }
    let mut x: Vec<f64> = Vec::with_capacity(n);
    let (mut value, mut slope): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-0.02..0.02));
    for change in slope_changes {
        slope += 0.05 * change;
        x.push(value);
        value += slope;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return x;
    }
    x.iter().map(|v| v / peak * amplitude).collect()
}

/// Two-channel Gaussian-wave ECG in mV: an MLII-like lead with annotations
/// and a smaller V5-like companion lead.
pub fn gaussian_ecg(duration_s: f64, fs: f64, bpm: f64, seed: u64) -> (EcgRecord, Vec<f64>) {
    let len = (duration_s * fs).round() as usize;
    let mut rng = rng::rng(seed);
    let beats = beat_positions(len, fs, bpm, &mut rng);
    let mut mlii = vec![0.0; len];
    let mut v5 = vec![0.0; len];
    for &r in &beats {
        let r = r as f64;
        let amp: f64 = rng.gen_range(0.9..1.1);
        let waves = [
            (-0.20, 0.025, 0.15),
            (-0.035, 0.010, -0.15),
            (0.0, 0.011, 1.2 * amp),
            (0.035, 0.010, -0.30),
            (0.30, 0.060, 0.30),
        ];
        for (offset, sigma, a) in waves {
            add_gaussian(&mut mlii, r + offset * fs, sigma * fs, a);
            add_gaussian(&mut v5, r + offset * fs, sigma * fs, 0.5 * a);
        }
    }
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    for (i, (a, b)) in mlii.iter_mut().zip(v5.iter_mut()).enumerate() {
        let t = i as f64 / fs;
        let wander = 0.05 * (std::f64::consts::TAU * 0.3 * t + phase).sin();
        *a += -0.3 + wander + rng.gen_range(-0.01..0.01);
        *b += -0.1 + wander + rng.gen_range(-0.01..0.01);
    }
    let rec = EcgRecord::new(mlii, fs, 11)
        .and_then(|rec| rec.with_annotations(beats))
        .expect("synthetic record is well formed");
    (rec, v5)
}

/// Quantizes two mV traces to 11-bit adu (`mV * 200 + 1024`) and writes them
/// as an interleaved format 212 file.
pub fn write_mit212_record(path: impl AsRef<Path>, ch0: &[f64], ch1: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let adu = |v: f64| (v * MIT_GAIN + MIT_BASELINE).round().clamp(0.0, 2047.0) as i16;
    let interleaved: Vec<i16> = ch0
        .iter()
        .zip(ch1)
        .flat_map(|(&a, &b)| [adu(a), adu(b)])
        .collect();
    std::fs::write(path, encode_212(&interleaved)?).map_err(|e| crate::Error::io(path, e))
}
