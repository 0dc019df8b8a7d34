//! Reconstruction quality (SNR, PRD) and R-peak detection scoring
//! (TP/FP/FN, DER, PPR).

use crate::{Error, Result};

/// SNR reported when the reconstruction is exact.
pub const SNR_CAP_DB: f64 = 300.0;
/// Default peak-matching tolerance: 50 ms at 360 Hz.
pub const DEFAULT_MATCH_TOLERANCE: usize = 18;

const DETECTOR_THRESHOLD: f64 = 0.6;
const DETECTOR_WINDOW_S: f64 = 2.0;
const REFRACTORY_S: f64 = 0.2;

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn check_lengths(x: &[f64], x_star: &[f64]) -> Result<()> {
    if x.len() != x_star.len() {
        return Err(Error::input(format!(
            "reference has {} samples, reconstruction {}",
            x.len(),
            x_star.len()
        )));
    }
    Ok(())
}

/// `-20 log10(||x - x*|| / ||x||)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(x: &[f64], x_star: &[f64]) -> Result<f64> {
    check_lengths(x, x_star)?;
    let reference = norm(x.iter().copied());
    if reference == 0.0 {
        return Err(Error::input("SNR reference has zero norm"));
    }
    let err = norm(x.iter().zip(x_star).map(|(a, b)| a - b));
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((-20.0 * (err / reference).log10()).min(SNR_CAP_DB))
}

/// `||x - x*|| / ||x - mean(x)||` as a ratio.
pub fn prd(x: &[f64], x_star: &[f64]) -> Result<f64> {
    check_lengths(x, x_star)?;
    if x.is_empty() {
        return Err(Error::input("PRD of an empty signal"));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let spread = norm(x.iter().map(|a| a - mean));
    if spread == 0.0 {
        return Err(Error::input("PRD reference is constant"));
    }
    Ok(norm(x.iter().zip(x_star).map(|(a, b)| a - b)) / spread)
}

/// PRD as a percentage.
pub fn prd_pct(x: &[f64], x_star: &[f64]) -> Result<f64> {
    prd(x, x_star).map(|r| 100.0 * r)
}

/// Amplitude R-peak detector.
///
/// A sample is a candidate when it is a local maximum (strictly above its
/// left neighbour, at least its right one) and exceeds 0.6 times the
/// maximum over the surrounding 2 s window (centered). Candidates are then
/// accepted largest first, dropping any within 200 ms of an accepted peak.
pub fn detect_rpeaks(x: &[f64], fs: f64) -> Vec<usize> {
    if x.len() < 3 || fs.is_nan() || fs <= 0.0 {
        return Vec::new();
    }
    let half = ((DETECTOR_WINDOW_S * fs) / 2.0).round().max(1.0) as usize;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let window_max = sliding_max(x, half);

    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| {
            x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] >= DETECTOR_THRESHOLD * window_max[i]
        })
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|&a| a.abs_diff(c) > refractory) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// `out[i] = max(x[i-half ..= i+half])`, clipped at the ends.
fn sliding_max(x: &[f64], half: usize) -> Vec<f64> {
    use std::collections::VecDeque;
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&j| x[j] <= x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&j| j + half < i) {
            dq.pop_front();
        }
        *o = x[*dq.front().expect("window is never empty")];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeakMatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(detected, truth)` index pairs.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy nearest matching: all `(detected, truth)` pairs within `tol`
/// samples are taken in order of increasing distance, each peak used at
/// most once.
pub fn match_peaks(detected: &[usize], truth: &[usize], tol: usize) -> PeakMatchResult {
    let mut cands: Vec<(usize, usize, usize)> = Vec::new();
    for (di, &d) in detected.iter().enumerate() {
        let lo = truth.partition_point(|&t| t + tol < d);
        for (ti, &t) in truth.iter().enumerate().skip(lo) {
            if t > d + tol {
                break;
            }
            cands.push((d.abs_diff(t), di, ti));
        }
    }
    cands.sort_unstable();
    let mut det_used = vec![false; detected.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, di, ti) in cands {
        if !det_used[di] && !truth_used[ti] {
            det_used[di] = true;
            truth_used[ti] = true;
            pairs.push((detected[di], truth[ti]));
        }
    }
    pairs.sort_unstable();
    let tp = pairs.len();
    PeakMatchResult {
        tp,
        fp: detected.len() - tp,
        fn_: truth.len() - tp,
        pairs,
    }
}

/// Detection error rate `(FP + FN) / TP * 100`; `None` when `TP = 0`.
pub fn der(m: &PeakMatchResult) -> Option<f64> {
    (m.tp > 0).then(|| (m.fp + m.fn_) as f64 / m.tp as f64 * 100.0)
}

/// Positive predictive rate `TP / (TP + FP) * 100`; `None` when nothing was
/// detected.
pub fn ppr(m: &PeakMatchResult) -> Option<f64> {
    let detected = m.tp + m.fp;
    (detected > 0).then(|| m.tp as f64 / detected as f64 * 100.0)
}
