use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RecordSource, SynthKind, TruthSource};
use super::ingest::{load_annotations, load_csv, load_mit212, EcgRecord};
use super::report::ReportRow;
use super::synth;
use crate::approx_arith::{AdderConfig, ModelLibrary, EXACT_MODEL};
use crate::channel::{self, add_awgn, InjectionPoint, NoiseSpec};
use crate::energy::{estimate_energy, EnergyTrace};
use crate::fixedpoint::{FxFormat, FxVector};
use crate::metrics::{detect_rpeaks, match_peaks, prd_pct, snr_db};
use crate::recon::{reconstruct, ReconParams};
use crate::rng::{mix64, split_seed};
use crate::sensing::{acquire, gen_bernoulli_plan, SensingPlan};
use crate::{Error, Result};

/// Loads or synthesizes the record named by `[record]`.
pub fn load_record(cfg: &ExperimentConfig) -> Result<EcgRecord> {
    let r = &cfg.record;
    let need_path = || {
        r.path
            .clone()
            .ok_or_else(|| Error::config("record.path is required for this source"))
    };
    let mut rec = match r.source {
        RecordSource::Csv => load_csv(need_path()?, r.fs)?,
        RecordSource::Mit212 => {
            let n = r
                .n_samples
                .ok_or_else(|| Error::config("record.n_samples is required for mit212"))?;
            load_mit212(need_path()?, r.channel, n, r.fs)?
        }
        RecordSource::Synthetic => match r.synthetic {
            SynthKind::Phantom => {
                synth::phantom_ecg(r.duration_s, r.fs, r.heart_rate_bpm, r.synth_seed)
            }
            SynthKind::Gaussian => {
                synth::gaussian_ecg(r.duration_s, r.fs, r.heart_rate_bpm, r.synth_seed).0
            }
        },
    };
    if let Some(p) = &r.annotations {
        let ann: Vec<usize> = load_annotations(p)?
            .into_iter()
            .filter(|&i| i < rec.len())
            .collect();
        rec = rec.with_annotations(ann)?;
    }
    Ok(rec)
}

/// Non-overlapping quantized frames of a record normalized by its peak
/// absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub frames: Vec<FxVector>,
    /// Multiply normalized values by this to get back record units.
    pub scale: f64,
    pub frame_len: usize,
}

impl Segmented {
    pub fn covered_len(&self) -> usize {
        self.frames.len() * self.frame_len
    }
}

/// Splits `rec` into `floor(len / n)` frames (the tail is dropped), divides
/// by `s = max |sample|` and quantizes each frame in `fmt`. An all-zero
/// record keeps `s = 1`.
pub fn segment_and_normalize(rec: &EcgRecord, n: usize, fmt: FxFormat) -> Result<Segmented> {
    if n == 0 || rec.len() < n {
        return Err(Error::input(format!(
            "record has {} samples, fewer than one {n}-sample frame",
            rec.len()
        )));
    }
    let peak = rec.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let frames = rec
        .samples
        .chunks_exact(n)
        .enumerate()
        .map(|(i, chunk)| {
            let normalized: Vec<f64> = chunk.iter().map(|v| v / scale).collect();
            FxVector::quantize(&normalized, fmt).map_err(|e| e.in_frame(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Segmented {
        frames,
        scale,
        frame_len: n,
    })
}

/// Concatenates normalized frames and undoes the normalization.
pub fn stitch(frames: &[Vec<f64>], scale: f64) -> Vec<f64> {
    frames.iter().flatten().map(|v| v * scale).collect()
}

/// Measurements of every frame of one trial, after the channel.
#[derive(Debug, Clone)]
pub struct Acquisition {
    pub plan: SensingPlan,
    pub measurements: Vec<Vec<f64>>,
    pub trace: EnergyTrace,
}

/// A record prepared for repeated trials: segmented once, truth peaks
/// fixed, library loaded.
#[derive(Debug, Clone)]
pub struct Trial {
    pub config: ExperimentConfig,
    pub library: ModelLibrary,
    pub record: EcgRecord,
    pub segmented: Segmented,
    /// Truth R-peaks within the covered part of the record.
    pub truth: Vec<usize>,
    fixed_plan: Option<SensingPlan>,
}

/// Everything a single trial produces.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub row: ReportRow,
    pub reconstruction: Vec<f64>,
    pub detected: Vec<usize>,
}

impl Trial {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Trial> {
        let library = cfg.library()?;
        cfg.validate(&library)?;
        let record = load_record(cfg)?;
        Trial::with_record(cfg, library, record)
    }

    pub fn with_record(
        cfg: &ExperimentConfig,
        library: ModelLibrary,
        record: EcgRecord,
    ) -> Result<Trial> {
        cfg.validate(&library)?;
        let fixed_plan = match &cfg.sensing.plan {
            Some(p) => {
                let plan = SensingPlan::load(p)?;
                if plan.n() != cfg.sensing.n {
                    return Err(Error::config(format!(
                        "plan file has N = {}, config says {}",
                        plan.n(),
                        cfg.sensing.n
                    )));
                }
                Some(plan)
            }
            None => None,
        };
        let segmented =
            segment_and_normalize(&record, cfg.sensing.n, cfg.adders.acquisition_format)?;
        let covered = segmented.covered_len();
        let reference = &record.samples[..covered];
        let use_annotations = match cfg.record.truth {
            TruthSource::Auto => record.annotations.is_some(),
            TruthSource::Annotations => {
                if record.annotations.is_none() {
                    return Err(Error::config(
                        "record.truth = annotations but the record has none",
                    ));
                }
                true
            }
            TruthSource::Detector => false,
        };
        let truth = if use_annotations {
            let ann = record.annotations.as_deref().unwrap_or_default();
            ann.iter().copied().filter(|&i| i < covered).collect()
        } else {
            detect_rpeaks(reference, record.fs)
        };
        Ok(Trial {
            config: cfg.clone(),
            library,
            record,
            segmented,
            truth,
            fixed_plan,
        })
    }

    pub fn reference(&self) -> &[f64] {
        &self.record.samples[..self.segmented.covered_len()]
    }

    pub fn plan(&self, seed: u64) -> Result<SensingPlan> {
        match &self.fixed_plan {
            Some(p) => Ok(p.clone()),
            None => {
                let s = &self.config.sensing;
                gen_bernoulli_plan(s.m, s.n, s.r, seed)
            }
        }
    }

    fn frame_noise(&self, noise: &NoiseSpec, seed: u64, frame: usize) -> NoiseSpec {
        noise.with_seed(split_seed(noise.seed ^ mix64(seed), frame as u64))
    }

    /// Compresses every frame on `model` at `approx_pct` and passes the
    /// measurements through the channel.
    pub fn acquire(
        &self,
        model: &str,
        approx_pct: f64,
        seed: u64,
        noise: &NoiseSpec,
    ) -> Result<Acquisition> {
        noise.validate()?;
        let fmt = self.config.adders.acquisition_format;
        let adders = AdderConfig::from_library(&self.library, model, approx_pct, fmt)?;
        let plan = self.plan(seed)?;
        let per_frame = self
            .segmented
            .frames
            .par_iter()
            .enumerate()
            .map(|(i, frame)| {
                let spec = self.frame_noise(noise, seed, i);
                let mut trace = EnergyTrace::default();
                let noisy_input;
                let input = if noise.injection_point == InjectionPoint::InputSignal
                    && noise.variance > 0.0
                {
                    let v = add_awgn(&frame.dequantize(), &spec)?;
                    noisy_input = FxVector::quantize(&v, fmt)?;
                    &noisy_input
                } else {
                    frame
                };
                let y = acquire(input, &plan, &adders, &mut trace)?.dequantize();
                let y = match noise.injection_point {
                    InjectionPoint::Measurements => add_awgn(&y, &spec)?,
                    InjectionPoint::InputSignal => y,
                };
                Ok((y, trace))
            })
            .enumerate()
            .map(|(i, r): (usize, Result<_>)| r.map_err(|e| e.in_frame(i)))
            .collect::<Result<Vec<_>>>()?;
        let mut trace = EnergyTrace::default();
        let mut measurements = Vec::with_capacity(per_frame.len());
        for (y, t) in per_frame {
            trace.merge(&t);
            measurements.push(y);
        }
        Ok(Acquisition {
            plan,
            measurements,
            trace,
        })
    }

    /// Reconstructs every frame and returns the stitched signal in record
    /// units. Each frame's solution is truncated to the reconstruction
    /// format before stitching.
    pub fn reconstruct(&self, acq: &Acquisition) -> Result<Vec<f64>> {
        reconstruct_frames(
            &acq.measurements,
            &acq.plan,
            &self.config.recon,
            self.config.adders.reconstruction_format,
            self.segmented.scale,
        )
    }

    pub fn run_detailed(
        &self,
        model: &str,
        approx_pct: f64,
        seed: u64,
        noise: &NoiseSpec,
    ) -> Result<TrialOutput> {
        let start = Instant::now();
        let acq = self.acquire(model, approx_pct, seed, noise)?;
        let recon = self.reconstruct(&acq)?;
        let reference = self.reference();
        let snr = snr_db(reference, &recon)?;
        let prd = prd_pct(reference, &recon)?;
        let detected = detect_rpeaks(&recon, self.record.fs);
        let matched = match_peaks(&detected, &self.truth, self.config.record.match_tolerance);
        let energy = estimate_energy(&acq.trace, &self.library)?;
        let mut row = ReportRow::new(model, approx_pct, seed, self.segmented.frames.len());
        row.fill_metrics(snr, prd, &matched);
        row.fill_energy(&energy);
        row.wall_time_s = start.elapsed().as_secs_f64();
        Ok(TrialOutput {
            row,
            reconstruction: recon,
            detected,
        })
    }

    /// Like [`Trial::run_detailed`], with failures folded into the row's
    /// error column.
    pub fn run(&self, model: &str, approx_pct: f64, seed: u64, noise: &NoiseSpec) -> ReportRow {
        match self.run_detailed(model, approx_pct, seed, noise) {
            Ok(out) => out.row,
            Err(e) => {
                let mut row = ReportRow::new(model, approx_pct, seed, self.segmented.frames.len());
                row.error = Some(e.to_string());
                row
            }
        }
    }
}

/// Everything needed to reconstruct an acquisition elsewhere: the plan,
/// the per-frame measurements and the normalization scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionBundle {
    pub model: String,
    pub approx_pct: f64,
    pub fs: f64,
    pub scale: f64,
    pub reconstruction_format: FxFormat,
    pub plan: SensingPlan,
    pub frames: Vec<Vec<f64>>,
}

impl AcquisitionBundle {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("bundle serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let b: AcquisitionBundle =
            toml::from_str(text).map_err(|e| Error::Format(format!("acquisition bundle: {e}")))?;
        if let Some(i) = b.frames.iter().position(|f| f.len() != b.plan.m()) {
            return Err(Error::Format(format!(
                "bundle frame {i} has {} measurements, plan has M = {}",
                b.frames[i].len(),
                b.plan.m()
            )));
        }
        Ok(b)
    }

    /// Reconstructs, truncates to the reconstruction format and stitches.
    pub fn reconstruct(&self, params: &ReconParams) -> Result<Vec<f64>> {
        reconstruct_frames(
            &self.frames,
            &self.plan,
            params,
            self.reconstruction_format,
            self.scale,
        )
    }
}

fn reconstruct_frames(
    measurements: &[Vec<f64>],
    plan: &SensingPlan,
    params: &ReconParams,
    fmt: FxFormat,
    scale: f64,
) -> Result<Vec<f64>> {
    let frames = measurements
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let res = reconstruct(y, plan, params).map_err(|e| e.in_frame(i))?;
            FxVector::quantize(&res.x_star, fmt)
                .map(|q| q.dequantize())
                .map_err(|e| e.in_frame(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(stitch(&frames, scale))
}

impl Trial {
    pub fn bundle(&self, model: &str, approx_pct: f64, acq: Acquisition) -> AcquisitionBundle {
        AcquisitionBundle {
            model: model.to_string(),
            approx_pct,
            fs: self.record.fs,
            scale: self.segmented.scale,
            reconstruction_format: self.config.adders.reconstruction_format,
            plan: acq.plan,
            frames: acq.measurements,
        }
    }
}

/// The configured experiment: one trial with `[adders]` and `[noise]`,
/// seeded by `sensing.seed`.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let trial = Trial::prepare(cfg)?;
    let out = trial.run_detailed(
        &cfg.adders.model,
        cfg.adders.approx_pct,
        cfg.sensing.seed,
        &cfg.noise,
    )?;
    Ok(vec![out.row])
}

/// Convenience for a single trial on an already-loaded record.
pub fn run_trial(cfg: &ExperimentConfig, record: EcgRecord) -> Result<TrialOutput> {
    let trial = Trial::with_record(cfg, cfg.library()?, record)?;
    trial.run_detailed(
        &cfg.adders.model,
        cfg.adders.approx_pct,
        cfg.sensing.seed,
        &cfg.noise,
    )
}

/// Error-margin study: the exact-adder pipeline once per channel variance.
pub fn noise_sweep_rows(
    cfg: &ExperimentConfig,
    variances: &[f64],
) -> Result<Vec<(f64, ReportRow)>> {
    let mut exact_cfg = cfg.clone();
    exact_cfg.adders.model = EXACT_MODEL.to_string();
    exact_cfg.adders.approx_pct = 0.0;
    let trial = Trial::prepare(&exact_cfg)?;
    let seed = cfg.sensing.seed;
    Ok(channel::noise_sweep(variances, &cfg.noise, |spec| {
        Ok(trial.run(EXACT_MODEL, 0.0, seed, spec))
    })
    .into_iter()
    .map(|(var, row)| {
        let row = row.unwrap_or_else(|e| {
            let mut r = ReportRow::new(EXACT_MODEL, 0.0, seed, trial.segmented.frames.len());
            r.error = Some(e.to_string());
            r
        });
        (var, row)
    })
    .collect())
}
