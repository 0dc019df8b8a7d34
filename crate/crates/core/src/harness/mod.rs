//! Record ingestion, the acquisition/reconstruction pipeline, design-space
//! sweeps and report emission.

mod config;
mod ingest;
mod pipeline;
mod plot;
mod report;
mod sweep;
pub mod synth;

pub use config::{
    AddersSection, ExperimentConfig, OutputSection, RecordSection, RecordSource, SensingSection,
    SweepSection, SynthKind, TruthSource,
};
pub use ingest::{
    decode_212, decode_212_triple, encode_212, load_annotations, load_csv, load_mit212,
    write_annotations, EcgRecord, MIT_BASELINE, MIT_GAIN,
};
pub use pipeline::{
    load_record, noise_sweep_rows, run_pipeline, run_trial, segment_and_normalize, stitch,
    Acquisition, AcquisitionBundle, Segmented, Trial, TrialOutput,
};
pub use plot::{line_plot_svg, Series};
pub use report::{write_noise_csv, write_report_csv, ReportRow, REPORT_COLUMNS};
pub use sweep::{mark_pareto, run_sweep, write_sweep_plots, SweepReport};
