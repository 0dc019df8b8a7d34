//! Bit-accurate ripple-carry adders built from exact and approximate
//! one-bit full-adder cells.
//!
//! Cell behaviour is data: each [`FullAdderModel`] carries its 8-row truth
//! table, an optional gate netlist that must reproduce the table, and a
//! per-evaluation cost used by the energy proxy. Models are loaded from a
//! [`ModelLibrary`] file.

mod library;
mod model;
mod rca;

pub use library::{ModelLibrary, DEFAULT_LIBRARY_TOML};
pub use model::{fa_eval, FullAdderModel, Gate, GateKind, Netlist, EXACT_MODEL};
pub use rca::{
    adder_error_metrics, approx_fraction_to_bits, rca_add, rca_add_bits, AdderConfig,
    AdderErrorMetrics, ErrorMetricMode,
};
