use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use approx_sensing::approx_arith::{
    adder_error_metrics, approx_fraction_to_bits, ErrorMetricMode, ModelLibrary,
};
use approx_sensing::harness::{
    noise_sweep_rows, run_pipeline, run_sweep, write_noise_csv, write_report_csv,
    write_sweep_plots, AcquisitionBundle, ExperimentConfig, Trial,
};
use approx_sensing::{Error, Result};

#[derive(Parser)]
#[command(
    name = "approx-sensing",
    version,
    about = "Compressed-sensing ECG on approximate adders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Adder model name.
    #[arg(long)]
    model: Option<String>,
    /// Percentage of LSB cells on the approximate model.
    #[arg(long)]
    approx_pct: Option<f64>,
    /// Sensing plan seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Channel noise variance.
    #[arg(long)]
    variance: Option<f64>,
    /// CSV record to read instead of the configured source.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Sampling rate of `--record`.
    #[arg(long)]
    fs: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = &self.model {
            cfg.adders.model = m.clone();
        }
        if let Some(p) = self.approx_pct {
            cfg.adders.approx_pct = p;
        }
        if let Some(s) = self.seed {
            cfg.sensing.seed = s;
        }
        if let Some(v) = self.variance {
            cfg.noise.variance = v;
        }
        if let Some(r) = &self.record {
            cfg.record.source = approx_sensing::harness::RecordSource::Csv;
            cfg.record.path = Some(r.clone());
        }
        if let Some(fs) = self.fs {
            cfg.record.fs = fs;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compress a record and write the measurements bundle.
    Acquire {
        #[command(flatten)]
        common: Common,
        /// Bundle output path (TOML); stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a bundle written by `acquire`; one sample per line.
    Reconstruct {
        /// Bundle from `acquire`.
        bundle: PathBuf,
        /// Config supplying `[recon]` parameters.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the configured experiment and write one report row.
    Run {
        #[command(flatten)]
        common: Common,
        /// Report CSV; falls back to `output.csv`, then stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the `[sweep]` grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Directory for SVG plots; falls back to `output.plots`.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Error rate and error distance of ripple-carry adders built from each model.
    AdderMetrics {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Restrict to these models (repeatable); all models by default.
        #[arg(long)]
        model: Vec<String>,
        /// Adder width in bits.
        #[arg(long, default_value_t = 8)]
        width: u32,
        /// Approximate-cell percentages.
        #[arg(long, value_delimiter = ',', default_value = "0,20,40,60,80,100")]
        pcts: Vec<f64>,
        /// Sample this many pairs instead of the automatic choice.
        #[arg(long)]
        pairs: Option<u64>,
        #[arg(long, default_value_t = 1)]
        sample_seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Exact-adder pipeline across channel variances.
    NoiseSweep {
        #[command(flatten)]
        common: Common,
        /// Variances; falls back to `sweep.variances`.
        #[arg(long, value_delimiter = ',')]
        variances: Option<Vec<f64>>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = open_out(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Acquire { common, out } => {
            let cfg = common.load()?;
            let trial = Trial::prepare(&cfg)?;
            let (model, pct) = (&cfg.adders.model, cfg.adders.approx_pct);
            let acq = trial.acquire(model, pct, cfg.sensing.seed, &cfg.noise)?;
            write_text(out.as_deref(), &trial.bundle(model, pct, acq).to_toml())
        }
        Command::Reconstruct {
            bundle,
            config,
            out,
        } => {
            let text = std::fs::read_to_string(&bundle).map_err(|e| Error::Io {
                path: bundle.clone(),
                source: e,
            })?;
            let b = AcquisitionBundle::from_toml_str(&text)?;
            let params = match config {
                Some(p) => ExperimentConfig::load(p)?.recon,
                None => Default::default(),
            };
            let x = b.reconstruct(&params)?;
            let mut s = String::with_capacity(x.len() * 24);
            for v in x {
                s.push_str(&format!("{v}\n"));
            }
            write_text(out.as_deref(), &s)
        }
        Command::Run { common, out } => {
            let cfg = common.load()?;
            let rows = run_pipeline(&cfg)?;
            let path = out.or(cfg.output.csv.clone());
            write_report_csv(open_out(path.as_deref())?, &rows)
        }
        Command::Sweep { common, out, plots } => {
            let cfg = common.load()?;
            let report = run_sweep(&cfg)?;
            let path = out.or(cfg.output.csv.clone());
            report.write_csv(open_out(path.as_deref())?)?;
            if let Some(dir) = plots.or(cfg.output.plots.clone()) {
                write_sweep_plots(&report, &dir)?;
            }
            Ok(())
        }
        Command::AdderMetrics {
            config,
            model,
            width,
            pcts,
            pairs,
            sample_seed,
            out,
        } => {
            let lib = match config {
                Some(p) => ExperimentConfig::load(p)?.library()?,
                None => ModelLibrary::default(),
            };
            if !(1..=64).contains(&width) {
                return Err(Error::Config(format!("width {width} outside 1..=64")));
            }
            let names: Vec<String> = if model.is_empty() {
                lib.models().iter().map(|m| m.name().to_string()).collect()
            } else {
                model
            };
            let mode = match pairs {
                Some(n) => ErrorMetricMode::Sampled {
                    pairs: n,
                    seed: sample_seed,
                },
                None => ErrorMetricMode::Auto { seed: sample_seed },
            };
            let mut w = csv::Writer::from_writer(open_out(out.as_deref())?);
            let err = |e: csv::Error| Error::Format(format!("writing metrics: {e}"));
            w.write_record([
                "model",
                "width",
                "approx_pct",
                "approx_bits",
                "pairs",
                "error_rate",
                "mean_error_distance",
                "max_error_distance",
            ])
            .map_err(err)?;
            for name in &names {
                let m = lib.get(name)?;
                for &pct in &pcts {
                    let k = approx_fraction_to_bits(pct, width);
                    let r = adder_error_metrics(m, width, k, mode)?;
                    w.write_record([
                        name.clone(),
                        width.to_string(),
                        format!("{pct:.6}"),
                        k.to_string(),
                        r.pairs.to_string(),
                        format!("{:.6}", r.error_rate),
                        format!("{:.6}", r.mean_error_distance),
                        r.max_error_distance.to_string(),
                    ])
                    .map_err(err)?;
                }
            }
            w.flush()
                .map_err(|e| Error::Format(format!("writing metrics: {e}")))
        }
        Command::NoiseSweep {
            common,
            variances,
            out,
        } => {
            let cfg = common.load()?;
            let variances = variances.unwrap_or_else(|| cfg.sweep.variances.clone());
            let rows = noise_sweep_rows(&cfg, &variances)?;
            let path = out.or(cfg.output.csv.clone());
            write_noise_csv(open_out(path.as_deref())?, &rows)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
