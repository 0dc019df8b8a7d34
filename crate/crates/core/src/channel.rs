//! Additive white Gaussian noise.
//!
//! Deviates come from the ziggurat standard normal of `rand_distr` driven by
//! a ChaCha8 stream, so a `(variance, seed)` pair yields the same noise on
//! every platform for the locked dependency versions.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Variance used by the default experiment configuration.
pub const DEFAULT_VARIANCE: f64 = 4e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InjectionPoint {
    /// Perturb the normalized input before acquisition.
    InputSignal,
    /// Perturb the dequantized measurements before reconstruction.
    #[default]
    Measurements,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
    pub injection_point: InjectionPoint,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            variance: DEFAULT_VARIANCE,
            seed: 0,
            injection_point: InjectionPoint::Measurements,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance >= 0.0) {
            return Err(Error::config(format!(
                "noise variance must be >= 0, got {}",
                self.variance
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variance(mut self, variance: f64) -> Self {
        self.variance = variance;
        self
    }
}

/// `v + n` with `n` i.i.d. `N(0, variance)`. Zero variance returns `v`
/// unchanged.
pub fn add_awgn(v: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.variance == 0.0 {
        return Ok(v.to_vec());
    }
    let sigma = spec.variance.sqrt();
    let mut g = rng::rng(spec.seed);
    Ok(v.iter()
        .map(|&x| x + sigma * g.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Runs `pipeline` once per variance (other noise settings from `base`).
/// Rows come back in the order of `variances`.
pub fn noise_sweep<R, F>(variances: &[f64], base: &NoiseSpec, pipeline: F) -> Vec<(f64, Result<R>)>
where
    R: Send,
    F: Fn(&NoiseSpec) -> Result<R> + Sync,
{
    variances
        .par_iter()
        .map(|&var| {
            let spec = base.with_variance(var);
            (var, spec.validate().and_then(|_| pipeline(&spec)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_is_identity() {
        let v = vec![0.1, -0.25, 3.0];
        let spec = NoiseSpec::default().with_variance(0.0);
        assert_eq!(add_awgn(&v, &spec).unwrap(), v);
    }

    #[test]
    fn seeded() {
        let v = vec![0.0; 64];
        let spec = NoiseSpec::default().with_seed(42);
        assert_eq!(add_awgn(&v, &spec).unwrap(), add_awgn(&v, &spec).unwrap());
        assert_ne!(
            add_awgn(&v, &spec).unwrap(),
            add_awgn(&v, &spec.with_seed(43)).unwrap()
        );
    }

    #[test]
    fn negative_variance_rejected() {
        let spec = NoiseSpec::default().with_variance(-1.0);
        assert!(add_awgn(&[0.0], &spec).is_err());
    }

    #[test]
    fn moments_at_default_variance() {
        let n = 1_000_000;
        let spec = NoiseSpec::default().with_seed(2024);
        let out = add_awgn(&vec![0.0; n], &spec).unwrap();
        let mean = out.iter().sum::<f64>() / n as f64;
        let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let energy = out.iter().map(|x| x * x).sum::<f64>();
        let sigma = DEFAULT_VARIANCE.sqrt();
        assert!(mean.abs() <= 3.0 * sigma / 1e3, "mean {mean}");
        assert!((var / DEFAULT_VARIANCE - 1.0).abs() < 0.01, "var {var}");
        assert!((energy / (n as f64 * DEFAULT_VARIANCE) - 1.0).abs() < 0.01);
    }

    #[test]
    fn sweep_keeps_order_and_duplicates_agree() {
        let rows = noise_sweep(&[0.0, 1e-3, 1e-3, -1.0], &NoiseSpec::default(), |spec| {
            add_awgn(&[0.0; 8], spec)
        });
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].1.as_ref().unwrap(), &vec![0.0; 8]);
        assert_eq!(rows[1].1.as_ref().unwrap(), rows[2].1.as_ref().unwrap());
        assert!(rows[3].1.is_err());
    }
}
