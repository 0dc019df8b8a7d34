use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::approx_arith::ModelLibrary;
use crate::channel::NoiseSpec;
use crate::fixedpoint::FxFormat;
use crate::recon::ReconParams;
use crate::sensing::{DEFAULT_M, DEFAULT_N, DEFAULT_R};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    #[default]
    Synthetic,
    Csv,
    Mit212,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Piecewise-linear beats.
    #[default]
    Phantom,
    /// Gaussian-wave beats over a wandering baseline.
    Gaussian,
}

/// Where the truth R-peaks come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    /// Annotations when the record has them, otherwise the detector.
    #[default]
    Auto,
    Annotations,
    /// Peaks the detector finds in the unprocessed record.
    Detector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordSection {
    pub source: RecordSource,
    pub path: Option<PathBuf>,
    pub fs: f64,
    /// Format 212 channel (0 or 1).
    pub channel: usize,
    /// Samples to read; format 212 records need it.
    pub n_samples: Option<usize>,
    /// Sidecar with one R-peak sample index per line.
    pub annotations: Option<PathBuf>,
    pub truth: TruthSource,
    /// Peak matching tolerance in samples.
    pub match_tolerance: usize,
    pub synthetic: SynthKind,
    pub duration_s: f64,
    pub heart_rate_bpm: f64,
    pub synth_seed: u64,
}

impl Default for RecordSection {
    fn default() -> Self {
        RecordSection {
            source: RecordSource::Synthetic,
            path: None,
            fs: 360.0,
            channel: 0,
            n_samples: None,
            annotations: None,
            truth: TruthSource::Auto,
            match_tolerance: crate::metrics::DEFAULT_MATCH_TOLERANCE,
            synthetic: SynthKind::Phantom,
            duration_s: 60.0,
            heart_rate_bpm: 72.0,
            synth_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingSection {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    /// Load this plan instead of generating one.
    pub plan: Option<PathBuf>,
}

impl Default for SensingSection {
    fn default() -> Self {
        SensingSection {
            m: DEFAULT_M,
            n: DEFAULT_N,
            r: DEFAULT_R,
            seed: 1,
            plan: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AddersSection {
    /// Model library file; the bundled library when absent.
    pub library: Option<PathBuf>,
    pub model: String,
    pub approx_pct: f64,
    pub acquisition_format: FxFormat,
    pub reconstruction_format: FxFormat,
}

impl Default for AddersSection {
    fn default() -> Self {
        AddersSection {
            library: None,
            model: crate::approx_arith::EXACT_MODEL.to_string(),
            approx_pct: 0.0,
            acquisition_format: FxFormat::ACQUISITION,
            reconstruction_format: FxFormat::RECONSTRUCTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub models: Vec<String>,
    pub approx_pcts: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Variances for the error-margin (noise) sweep.
    pub variances: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            models: (1..=7).map(|i| format!("lpaa{i}")).collect(),
            approx_pcts: vec![0.0, 20.0, 40.0, 60.0, 80.0],
            seeds: vec![1, 2, 3, 4, 5],
            variances: vec![0.0, 1e-4, 4e-4, 1e-3, 4e-3, 1e-2, 4e-2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub plots: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub record: RecordSection,
    pub sensing: SensingSection,
    pub adders: AddersSection,
    pub noise: NoiseSpec,
    pub recon: ReconParams,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("experiment config: {e}")))
    }

    /// Loads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.record.path);
        resolve(base, &mut cfg.record.annotations);
        resolve(base, &mut cfg.sensing.plan);
        resolve(base, &mut cfg.adders.library);
        resolve(base, &mut cfg.output.csv);
        resolve(base, &mut cfg.output.plots);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn library(&self) -> Result<ModelLibrary> {
        match &self.adders.library {
            Some(p) => ModelLibrary::from_path(p),
            None => Ok(ModelLibrary::default()),
        }
    }

    /// Checks everything that can be checked without touching the record.
    pub fn validate(&self, library: &ModelLibrary) -> Result<()> {
        library.get(&self.adders.model)?;
        if !(0.0..=100.0).contains(&self.adders.approx_pct) {
            return Err(Error::config(format!(
                "approx_pct {} outside [0, 100]",
                self.adders.approx_pct
            )));
        }
        self.noise.validate()?;
        self.recon.validate()?;
        if !(self.record.fs.is_finite() && self.record.fs > 0.0) {
            return Err(Error::config("record.fs must be positive"));
        }
        for m in &self.sweep.models {
            library.get(m)?;
        }
        if let Some(p) = self
            .sweep
            .approx_pcts
            .iter()
            .find(|p| !(0.0..=100.0).contains(*p))
        {
            return Err(Error::config(format!(
                "sweep approx_pct {p} outside [0, 100]"
            )));
        }
        Ok(())
    }
}
