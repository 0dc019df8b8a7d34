use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::pipeline::Trial;
use super::plot::{line_plot_svg, Series};
use super::report::{write_report_csv, ReportRow};
use crate::approx_arith::{approx_fraction_to_bits, EXACT_MODEL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Grid order: models outermost, then percentages, then seeds.
    pub rows: Vec<ReportRow>,
}

impl SweepReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_report_csv(out, &self.rows)
    }

    pub fn pareto_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.pareto)
    }

    /// Median over seeds of `metric`, per `(model, approx_pct)` in grid
    /// order. Failed or undefined cells are left out.
    pub fn medians(
        &self,
        metric: impl Fn(&ReportRow) -> Option<f64>,
    ) -> Vec<(String, f64, Option<f64>)> {
        let mut keys: Vec<(String, f64)> = Vec::new();
        let mut vals: HashMap<(String, u64), Vec<f64>> = HashMap::new();
        for r in &self.rows {
            let key = (r.model.clone(), r.approx_pct.to_bits());
            if !vals.contains_key(&key) {
                keys.push((r.model.clone(), r.approx_pct));
            }
            let entry = vals.entry(key).or_default();
            if let Some(v) = metric(r).filter(|v| v.is_finite()) {
                entry.push(v);
            }
        }
        keys.into_iter()
            .map(|(m, p)| {
                let v = &vals[&(m.clone(), p.to_bits())];
                (m, p, median(v))
            })
            .collect()
    }
}

pub(crate) fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

/// Runs the full `models × approx_pcts × seeds` grid from `[sweep]` on the
/// configured record and noise. A failing cell records its error and the
/// sweep carries on.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let s = &cfg.sweep;
    if s.models.is_empty() || s.approx_pcts.is_empty() || s.seeds.is_empty() {
        return Err(Error::config("sweep grid is empty"));
    }
    let trial = Trial::prepare(cfg)?;
    let width = cfg.adders.acquisition_format.width();

    // Cells that put no bit on the approximate model are the exact adder
    // whatever the model name, so they are computed once per seed.
    let key = |model: &str, pct: f64, seed: u64| {
        let k = approx_fraction_to_bits(pct, width);
        let m = if k == 0 { EXACT_MODEL } else { model };
        (m.to_string(), k, seed)
    };
    let mut grid = Vec::new();
    let mut unique: Vec<(String, f64, u64)> = Vec::new();
    let mut index = HashMap::new();
    for model in &s.models {
        for &pct in &s.approx_pcts {
            for &seed in &s.seeds {
                let k = key(model, pct, seed);
                let slot = *index.entry(k).or_insert_with(|| {
                    unique.push((model.clone(), pct, seed));
                    unique.len() - 1
                });
                grid.push((model.clone(), pct, seed, slot));
            }
        }
    }
    let results: Vec<ReportRow> = unique
        .par_iter()
        .map(|(m, p, seed)| trial.run(m, *p, *seed, &cfg.noise))
        .collect();
    let mut rows: Vec<ReportRow> = grid
        .into_iter()
        .map(|(model, pct, seed, slot)| {
            let mut row = results[slot].clone();
            row.model = model;
            row.approx_pct = pct;
            row.seed = seed;
            row
        })
        .collect();
    mark_pareto(&mut rows);
    Ok(SweepReport { rows })
}

/// Flags rows no other row beats on both lower `energy_total` and higher
/// `snr_db` (ties on both count as non-dominating). Failed rows are never
/// on the front.
pub fn mark_pareto(rows: &mut [ReportRow]) {
    let pts: Vec<Option<(f64, f64)>> = rows
        .iter()
        .map(|r| match (r.is_ok(), r.energy_total, r.snr_db) {
            (true, Some(e), Some(s)) if e.is_finite() && s.is_finite() => Some((e, s)),
            _ => None,
        })
        .collect();
    for (i, row) in rows.iter_mut().enumerate() {
        row.pareto = match pts[i] {
            None => false,
            Some((e, s)) => !pts
                .iter()
                .flatten()
                .any(|&(e2, s2)| e2 <= e && s2 >= s && (e2 < e || s2 > s)),
        };
    }
}

/// Writes `snr_vs_pct.svg` and `energy_vs_pct.svg` into `dir`, one line per
/// model through the per-percentage medians over seeds.
pub fn write_sweep_plots(report: &SweepReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    type Metric = fn(&ReportRow) -> Option<f64>;
    let plots: [(&str, &str, &str, Metric); 2] = [
        ("snr_vs_pct.svg", "Median SNR", "SNR (dB)", |r| r.snr_db),
        ("energy_vs_pct.svg", "Median proxy energy", "energy", |r| {
            r.energy_total
        }),
    ];
    for (file, title, y_label, metric) in plots {
        let mut series: Vec<Series> = Vec::new();
        for (model, pct, v) in report.medians(metric) {
            let Some(v) = v else { continue };
            match series.iter_mut().find(|s| s.name == model) {
                Some(s) => s.points.push((pct, v)),
                None => series.push(Series {
                    name: model,
                    points: vec![(pct, v)],
                }),
            }
        }
        for s in &mut series {
            s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let svg = line_plot_svg(title, "approximate bits (%)", y_label, &series);
        let path = dir.join(file);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
