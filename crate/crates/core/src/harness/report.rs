use std::io::Write;

use crate::energy::EnergyReport;
use crate::metrics::{der, ppr, PeakMatchResult};
use crate::{Error, Result};

/// Report CSV header, in column order.
pub const REPORT_COLUMNS: [&str; 16] = [
    "model",
    "approx_pct",
    "seed",
    "frame_count",
    "snr_db",
    "prd_pct",
    "der_pct",
    "ppr_pct",
    "tp",
    "fp",
    "fn",
    "energy_total",
    "energy_baseline",
    "energy_savings_pct",
    "pareto",
    "error",
];

/// One trial of one configuration. Metric fields stay `None` when the
/// trial failed (`error` is set) or the metric is undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportRow {
    pub model: String,
    pub approx_pct: f64,
    pub seed: u64,
    pub frame_count: usize,
    pub snr_db: Option<f64>,
    pub prd_pct: Option<f64>,
    pub der_pct: Option<f64>,
    pub ppr_pct: Option<f64>,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    pub fn_: Option<usize>,
    pub energy_total: Option<f64>,
    pub energy_baseline: Option<f64>,
    pub energy_savings_pct: Option<f64>,
    pub pareto: bool,
    pub error: Option<String>,
    /// Not written to the CSV, which must be reproducible byte for byte.
    pub wall_time_s: f64,
}

impl ReportRow {
    pub fn new(model: &str, approx_pct: f64, seed: u64, frame_count: usize) -> Self {
        ReportRow {
            model: model.to_string(),
            approx_pct,
            seed,
            frame_count,
            ..ReportRow::default()
        }
    }

    pub(crate) fn fill_metrics(&mut self, snr: f64, prd: f64, m: &PeakMatchResult) {
        self.snr_db = Some(snr);
        self.prd_pct = Some(prd);
        self.der_pct = der(m);
        self.ppr_pct = ppr(m);
        self.tp = Some(m.tp);
        self.fp = Some(m.fp);
        self.fn_ = Some(m.fn_);
    }

    pub(crate) fn fill_energy(&mut self, e: &EnergyReport) {
        self.energy_total = Some(e.total_cost);
        self.energy_baseline = Some(e.baseline_cost);
        self.energy_savings_pct = Some(e.savings_pct);
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn fields(&self) -> Vec<String> {
        fn f(v: Option<f64>) -> String {
            v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
        }
        fn u(v: Option<usize>) -> String {
            v.map_or_else(|| "NA".to_string(), |x| x.to_string())
        }
        vec![
            self.model.clone(),
            format!("{:.6}", self.approx_pct),
            self.seed.to_string(),
            self.frame_count.to_string(),
            f(self.snr_db),
            f(self.prd_pct),
            f(self.der_pct),
            f(self.ppr_pct),
            u(self.tp),
            u(self.fp),
            u(self.fn_),
            f(self.energy_total),
            f(self.energy_baseline),
            f(self.energy_savings_pct),
            u8::from(self.pareto).to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Writes the header and rows. Floats use six decimals; undefined values
/// are written as `NA`.
pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    write_csv(out, &REPORT_COLUMNS, rows.iter().map(|r| r.fields()))
}

/// Same as [`write_report_csv`] with a leading `variance` column.
pub fn write_noise_csv<W: Write>(out: W, rows: &[(f64, ReportRow)]) -> Result<()> {
    let mut header = vec!["variance"];
    header.extend(REPORT_COLUMNS);
    write_csv(
        out,
        &header,
        rows.iter().map(|(v, r)| {
            let mut fields = vec![format!("{v:e}")];
            fields.extend(r.fields());
            fields
        }),
    )
}

fn write_csv<W: Write>(
    out: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let err = |e: csv::Error| Error::Format(format!("writing report: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(err)?;
    for fields in rows {
        w.write_record(&fields).map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("writing report: {e}")))
}
