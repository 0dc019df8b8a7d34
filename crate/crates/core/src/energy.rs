//! Proxy energy accounting.
//!
//! Every one-bit cell evaluation is charged its model's `cost`. A workload's
//! baseline is the same evaluation count charged at the exact cell's cost,
//! so savings depend only on how many cells were approximate, not on the
//! signal.

use std::collections::BTreeMap;

use crate::approx_arith::ModelLibrary;
use crate::{Error, Result};

/// Per-model counts of full-adder evaluations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnergyTrace {
    counts: BTreeMap<String, u64>,
}

impl EnergyTrace {
    pub fn record(&mut self, model: &str, evaluations: u64) {
        if evaluations == 0 {
            return;
        }
        match self.counts.get_mut(model) {
            Some(c) => *c += evaluations,
            None => {
                self.counts.insert(model.to_string(), evaluations);
            }
        }
    }

    pub fn count(&self, model: &str) -> u64 {
        self.counts.get(model).copied().unwrap_or(0)
    }

    pub fn total_evaluations(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn merge(&mut self, other: &EnergyTrace) {
        for (model, n) in other.iter() {
            self.record(model, n);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub total_cost: f64,
    pub baseline_cost: f64,
    pub savings_pct: f64,
}

pub fn estimate_energy(trace: &EnergyTrace, library: &ModelLibrary) -> Result<EnergyReport> {
    let mut total = 0.0;
    for (model, n) in trace.iter() {
        let m = library
            .get(model)
            .map_err(|_| Error::config(format!("trace references unknown model `{model}`")))?;
        total += n as f64 * m.cost();
    }
    let baseline = trace.total_evaluations() as f64 * library.exact().cost();
    let savings_pct = if baseline > 0.0 {
        100.0 * (1.0 - total / baseline)
    } else {
        0.0
    };
    Ok(EnergyReport {
        total_cost: total,
        baseline_cost: baseline,
        savings_pct,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsRow {
    pub model: String,
    pub approx_pct: f64,
    pub savings_pct: f64,
    pub total_cost: f64,
}

/// Savings per configuration, grouped by model (first-appearance order) and
/// sorted by approximation percentage within each model.
pub fn savings_curve<'a, I>(reports: I) -> Vec<SavingsRow>
where
    I: IntoIterator<Item = (&'a str, f64, &'a EnergyReport)>,
{
    let mut order: Vec<&str> = Vec::new();
    let mut rows: Vec<SavingsRow> = Vec::new();
    for (model, pct, r) in reports {
        if !order.contains(&model) {
            order.push(model);
        }
        rows.push(SavingsRow {
            model: model.to_string(),
            approx_pct: pct,
            savings_pct: r.savings_pct,
            total_cost: r.total_cost,
        });
    }
    rows.sort_by(|a, b| {
        let ia = order.iter().position(|m| *m == a.model);
        let ib = order.iter().position(|m| *m == b.model);
        ia.cmp(&ib).then(a.approx_pct.total_cmp(&b.approx_pct))
    });
    rows
}

/// Cell cost that makes a workload with `approx_bits` of `width` cells
/// approximate save `target_pct` percent against `exact_cost`.
pub fn calibrated_cost(
    exact_cost: f64,
    target_pct: f64,
    approx_bits: u32,
    width: u32,
) -> Result<f64> {
    if approx_bits == 0 || approx_bits > width {
        return Err(Error::config(format!(
            "cannot calibrate with {approx_bits} of {width} approximate cells"
        )));
    }
    let ratio = 1.0 - target_pct / 100.0 * width as f64 / approx_bits as f64;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config(format!(
            "{target_pct}% savings is unreachable with {approx_bits}/{width} approximate cells"
        )));
    }
    Ok(ratio * exact_cost)
}
