//! Bernoulli sensing plans and sparse-multiplier acquisition.
//!
//! A plan stores, for each of the `M` rows of the `M x N` sensing matrix,
//! the sorted columns holding its `r` ones. Acquisition never builds the
//! matrix: measurement `k` is the running ripple-carry sum of the `r`
//! selected samples.

use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::approx_arith::{rca_add_bits, AdderConfig};
use crate::energy::EnergyTrace;
use crate::fixedpoint::{FxVector, FxWord};
use crate::{rng, Error, Result};

pub const DEFAULT_M: usize = 128;
pub const DEFAULT_N: usize = 256;
pub const DEFAULT_R: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlanFile", into = "PlanFile")]
pub struct SensingPlan {
    m: usize,
    n: usize,
    r: usize,
    seed: u64,
    z: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    m: usize,
    n: usize,
    r: usize,
    seed: u64,
    z: Vec<usize>,
}

impl TryFrom<PlanFile> for SensingPlan {
    type Error = Error;

    fn try_from(f: PlanFile) -> Result<Self> {
        SensingPlan::from_indices(f.m, f.n, f.r, f.seed, f.z)
    }
}

impl From<SensingPlan> for PlanFile {
    fn from(p: SensingPlan) -> Self {
        PlanFile {
            m: p.m,
            n: p.n,
            r: p.r,
            seed: p.seed,
            z: p.z,
        }
    }
}

fn check_dims(m: usize, n: usize, r: usize) -> Result<()> {
    if m == 0 || r == 0 {
        return Err(Error::config(format!(
            "plan needs M >= 1 and r >= 1 (M={m}, r={r})"
        )));
    }
    if r > n {
        return Err(Error::config(format!(
            "r = {r} ones per row exceeds N = {n}"
        )));
    }
    if m >= n {
        return Err(Error::config(format!("M = {m} must be below N = {n}")));
    }
    Ok(())
}

/// Draws `r` distinct columns per row, uniformly without replacement, from
/// a ChaCha8 stream seeded with `seed`; each row's columns are sorted.
pub fn gen_bernoulli_plan(m: usize, n: usize, r: usize, seed: u64) -> Result<SensingPlan> {
    check_dims(m, n, r)?;
    let mut rng = rng::rng(seed);
    let mut z = Vec::with_capacity(m * r);
    for _ in 0..m {
        let mut row = index::sample(&mut rng, n, r).into_vec();
        row.sort_unstable();
        z.extend(row);
    }
    Ok(SensingPlan { m, n, r, seed, z })
}

impl SensingPlan {
    /// Validates a row-major index vector.
    pub fn from_indices(m: usize, n: usize, r: usize, seed: u64, z: Vec<usize>) -> Result<Self> {
        check_dims(m, n, r)?;
        if z.len() != m * r {
            return Err(Error::config(format!(
                "z has {} entries, expected M*r = {}",
                z.len(),
                m * r
            )));
        }
        for (k, row) in z.chunks(r).enumerate() {
            if row.iter().any(|&j| j >= n) {
                return Err(Error::config(format!(
                    "row {k} has a column index >= N = {n}"
                )));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(format!(
                    "row {k} indices are not strictly increasing"
                )));
            }
        }
        Ok(SensingPlan { m, n, r, seed, z })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn indices(&self) -> &[usize] {
        &self.z
    }

    pub fn row(&self, k: usize) -> &[usize] {
        &self.z[k * self.r..(k + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.z.chunks(self.r)
    }

    /// Dense `M x N` 0/1 matrix, row-major.
    pub fn dense(&self) -> Vec<Vec<u8>> {
        self.rows()
            .map(|row| {
                let mut d = vec![0u8; self.n];
                for &j in row {
                    d[j] = 1;
                }
                d
            })
            .collect()
    }

    /// `Phi x` in real arithmetic.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = row.iter().map(|&j| x[j]).sum();
        }
    }

    /// `Phi^T y`, by scattering each measurement onto its row's columns.
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        out.fill(0.0);
        for (&yk, row) in y.iter().zip(self.rows()) {
            for &j in row {
                out[j] += yk;
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("sensing plan: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SensingPlan::from_toml_str(&text)
    }
}

/// Compresses one frame. Each measurement starts from zero and adds its
/// row's samples left to right on `adders`, so a frame costs `M * r`
/// additions of `W` cells each.
pub fn acquire(
    x: &FxVector,
    plan: &SensingPlan,
    adders: &AdderConfig,
    trace: &mut EnergyTrace,
) -> Result<FxVector> {
    if x.len() != plan.n {
        return Err(Error::config(format!(
            "frame has {} samples, plan expects N = {}",
            x.len(),
            plan.n
        )));
    }
    let fmt = adders.format();
    if x.format() != fmt {
        return Err(Error::config(format!(
            "frame format {} does not match adder format {fmt}",
            x.format()
        )));
    }
    let raw = x.raw();
    let mut y = FxVector::with_capacity(plan.m, fmt);
    for row in plan.rows() {
        let mut acc = 0u64;
        for &j in row {
            acc = rca_add_bits(adders, acc, fmt.to_bits(raw[j]));
        }
        y.push(FxWord::from_raw_unchecked(fmt.from_bits(acc), fmt));
    }
    adders.record(trace, (plan.m * plan.r) as u64);
    Ok(y)
}
