use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::library::ModelLibrary;
use super::model::FullAdderModel;
use crate::energy::EnergyTrace;
use crate::fixedpoint::{FxFormat, FxWord};
use crate::{Error, Result};

/// A `W`-bit ripple-carry adder whose `k` least-significant cells use an
/// approximate model and whose remaining cells are exact.
#[derive(Debug, Clone)]
pub struct AdderConfig {
    approx: FullAdderModel,
    exact: FullAdderModel,
    approx_bits: u32,
    format: FxFormat,
    // (sum | cout << 1) per row, for the two cell kinds
    approx_lut: [u8; 8],
    exact_lut: [u8; 8],
}

fn lut(model: &FullAdderModel) -> [u8; 8] {
    std::array::from_fn(|row| {
        let (s, c) = model.table()[row];
        s as u8 | (c as u8) << 1
    })
}

impl AdderConfig {
    pub fn new(
        approx: FullAdderModel,
        exact: FullAdderModel,
        approx_bits: u32,
        format: FxFormat,
    ) -> Result<Self> {
        if !exact.is_exact() {
            return Err(Error::config(format!(
                "model `{}` used for the exact region is not exact",
                exact.name()
            )));
        }
        if approx_bits > format.width() {
            return Err(Error::config(format!(
                "{approx_bits} approximate bits exceed the {}-bit word",
                format.width()
            )));
        }
        Ok(AdderConfig {
            approx_lut: lut(&approx),
            exact_lut: lut(&exact),
            approx,
            exact,
            approx_bits,
            format,
        })
    }

    /// Looks `model` up in `library` and approximates `approx_pct` percent
    /// of the word's cells.
    pub fn from_library(
        library: &ModelLibrary,
        model: &str,
        approx_pct: f64,
        format: FxFormat,
    ) -> Result<Self> {
        if !(0.0..=100.0).contains(&approx_pct) {
            return Err(Error::config(format!(
                "approx_pct {approx_pct} outside [0, 100]"
            )));
        }
        let k = approx_fraction_to_bits(approx_pct, format.width());
        AdderConfig::new(
            library.get(model)?.clone(),
            library.exact().clone(),
            k,
            format,
        )
    }

    /// All-exact adder of the given format.
    pub fn exact(format: FxFormat) -> Self {
        let exact = FullAdderModel::exact(1.0);
        AdderConfig::new(exact.clone(), exact, 0, format).expect("exact config is valid")
    }

    pub fn approx_model(&self) -> &FullAdderModel {
        &self.approx
    }

    pub fn exact_model(&self) -> &FullAdderModel {
        &self.exact
    }

    pub fn approx_bits(&self) -> u32 {
        self.approx_bits
    }

    pub fn width(&self) -> u32 {
        self.format.width()
    }

    pub fn format(&self) -> FxFormat {
        self.format
    }

    pub(crate) fn record(&self, trace: &mut EnergyTrace, additions: u64) {
        let w = self.width() as u64;
        let k = self.approx_bits as u64;
        trace.record(self.approx.name(), additions * k);
        trace.record(self.exact.name(), additions * (w - k));
    }
}

/// Adds two `W`-bit patterns cell by cell. The carry ripples continuously
/// from the approximate region into the exact one; the carry out of the top
/// cell is dropped.
#[inline]
pub fn rca_add_bits(cfg: &AdderConfig, x: u64, y: u64) -> u64 {
    let mut carry = 0u8;
    let mut out = 0u64;
    for i in 0..cfg.width() {
        let lut = if i < cfg.approx_bits {
            &cfg.approx_lut
        } else {
            &cfg.exact_lut
        };
        let a = ((x >> i) & 1) as usize;
        let b = ((y >> i) & 1) as usize;
        let cell = lut[a << 2 | b << 1 | carry as usize];
        out |= ((cell & 1) as u64) << i;
        carry = cell >> 1;
    }
    out
}

/// Ripple-carry sum of two words, recording one evaluation per cell in
/// `trace`.
pub fn rca_add(cfg: &AdderConfig, x: FxWord, y: FxWord, trace: &mut EnergyTrace) -> Result<FxWord> {
    for w in [x, y] {
        if w.format() != cfg.format {
            return Err(Error::config(format!(
                "operand format {} does not match adder format {}",
                w.format(),
                cfg.format
            )));
        }
    }
    let bits = rca_add_bits(cfg, x.bits(), y.bits());
    cfg.record(trace, 1);
    Ok(FxWord::from_raw_unchecked(
        cfg.format.from_bits(bits),
        cfg.format,
    ))
}

/// Number of approximate LSB cells for `pct` percent of a `width`-bit word,
/// `floor(pct / 100 * width)`. `pct` is clamped to `[0, 100]`.
pub fn approx_fraction_to_bits(pct: f64, width: u32) -> u32 {
    let pct = pct.clamp(0.0, 100.0);
    ((pct * width as f64) / 100.0).floor() as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdderErrorMetrics {
    pub error_rate: f64,
    /// Mean `|approx - exact|` in raw integer units.
    pub mean_error_distance: f64,
    pub max_error_distance: u64,
    pub pairs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetricMode {
    /// Exhaustive for `W <= 12`, otherwise 10^6 seeded samples.
    Auto {
        seed: u64,
    },
    Exhaustive,
    Sampled {
        pairs: u64,
        seed: u64,
    },
}

pub const EXHAUSTIVE_MAX_WIDTH: u32 = 12;
pub const DEFAULT_SAMPLED_PAIRS: u64 = 1_000_000;

/// Error statistics of a `width`-bit adder with `k` approximate cells of
/// `model`, compared against exact two's-complement addition.
///
/// The error distance of a pair is the absolute value of the wrapped
/// difference `(approx - exact) mod 2^W`, read as a signed `W`-bit integer.
pub fn adder_error_metrics(
    model: &FullAdderModel,
    width: u32,
    k: u32,
    mode: ErrorMetricMode,
) -> Result<AdderErrorMetrics> {
    if width == 0 || width > 64 {
        return Err(Error::config(format!("adder width {width} outside 1..=64")));
    }
    // The word is treated as a pure integer here; integer_bits only needs
    // to make the width come out right.
    let format = if width <= 16 {
        FxFormat::new(width, 0)?
    } else {
        FxFormat::new(16, width - 16)?
    };
    let cfg = AdderConfig::new(model.clone(), FullAdderModel::exact(1.0), k, format)?;
    let mask = format.mask();

    let mut errors = 0u64;
    let mut total_dist = 0u128;
    let mut max_dist = 0u64;
    let mut pairs = 0u64;
    let mut visit = |x: u64, y: u64| {
        let approx = rca_add_bits(&cfg, x, y);
        let exact = x.wrapping_add(y) & mask;
        let diff = format.from_bits(approx.wrapping_sub(exact) & mask);
        let dist = diff.unsigned_abs();
        pairs += 1;
        if dist != 0 {
            errors += 1;
            total_dist += dist as u128;
            max_dist = max_dist.max(dist);
        }
    };

    let mode = match mode {
        ErrorMetricMode::Auto { seed } if width > EXHAUSTIVE_MAX_WIDTH => {
            ErrorMetricMode::Sampled {
                pairs: DEFAULT_SAMPLED_PAIRS,
                seed,
            }
        }
        ErrorMetricMode::Auto { .. } => ErrorMetricMode::Exhaustive,
        m => m,
    };
    match mode {
        ErrorMetricMode::Exhaustive => {
            if width > EXHAUSTIVE_MAX_WIDTH {
                return Err(Error::config(format!(
                    "exhaustive error metrics need W <= {EXHAUSTIVE_MAX_WIDTH}, got {width}"
                )));
            }
            for x in 0..=mask {
                for y in 0..=mask {
                    visit(x, y);
                }
            }
        }
        ErrorMetricMode::Sampled { pairs: n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let x = rng.gen::<u64>() & mask;
                let y = rng.gen::<u64>() & mask;
                visit(x, y);
            }
        }
        ErrorMetricMode::Auto { .. } => unreachable!(),
    }
    if pairs == 0 {
        return Err(Error::config("no input pairs evaluated"));
    }
    Ok(AdderErrorMetrics {
        error_rate: errors as f64 / pairs as f64,
        mean_error_distance: total_dist as f64 / pairs as f64,
        max_error_distance: max_dist,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx_arith::ModelLibrary;

    fn q8() -> FxFormat {
        FxFormat::new(4, 4).unwrap()
    }

    #[test]
    fn fraction_to_bits_examples() {
        assert_eq!(approx_fraction_to_bits(40.0, 40), 16);
        assert_eq!(approx_fraction_to_bits(0.0, 37), 0);
        assert_eq!(approx_fraction_to_bits(80.0, 37), 29);
        assert_eq!(approx_fraction_to_bits(100.0, 37), 37);
        assert_eq!(approx_fraction_to_bits(20.0, 37), 7);
    }

    #[test]
    fn exact_config_adds_integers() {
        let cfg = AdderConfig::exact(q8());
        let mut trace = EnergyTrace::default();
        let x = FxWord::from_raw(-3, q8()).unwrap();
        let y = FxWord::from_raw(100, q8()).unwrap();
        assert_eq!(rca_add(&cfg, x, y, &mut trace).unwrap().raw(), 97);
        // wraparound
        let x = FxWord::from_raw(127, q8()).unwrap();
        let y = FxWord::from_raw(1, q8()).unwrap();
        assert_eq!(rca_add(&cfg, x, y, &mut trace).unwrap().raw(), -128);
        assert_eq!(trace.total_evaluations(), 16);
    }

    #[test]
    fn all_approximate_exact_model_is_exact() {
        let exact = FullAdderModel::exact(1.0);
        let cfg = AdderConfig::new(exact.clone(), exact, 8, q8()).unwrap();
        for x in 0..256u64 {
            for y in 0..256u64 {
                assert_eq!(rca_add_bits(&cfg, x, y), (x + y) & 0xFF);
            }
        }
    }

    #[test]
    fn format_mismatch_rejected() {
        let cfg = AdderConfig::exact(q8());
        let other = FxFormat::new(4, 5).unwrap();
        let mut trace = EnergyTrace::default();
        let r = rca_add(&cfg, FxWord::zero(q8()), FxWord::zero(other), &mut trace);
        assert!(matches!(r, Err(Error::Config(_))));
        assert_eq!(trace.total_evaluations(), 0);
    }

    #[test]
    fn too_many_approx_bits_rejected() {
        let e = FullAdderModel::exact(1.0);
        assert!(AdderConfig::new(e.clone(), e, 9, q8()).is_err());
    }

    #[test]
    fn trace_splits_cells_by_model() {
        let lib = ModelLibrary::default();
        let cfg = AdderConfig::new(
            lib.get("lpaa3").unwrap().clone(),
            lib.exact().clone(),
            3,
            q8(),
        )
        .unwrap();
        let mut trace = EnergyTrace::default();
        rca_add(&cfg, FxWord::zero(q8()), FxWord::zero(q8()), &mut trace).unwrap();
        assert_eq!(trace.count("lpaa3"), 3);
        assert_eq!(trace.count("exact"), 5);
    }

    #[test]
    fn metrics_trivial_cases() {
        let lib = ModelLibrary::default();
        let exact = lib.exact();
        for (w, k) in [(4, 4), (8, 3), (8, 8)] {
            let m = adder_error_metrics(exact, w, k, ErrorMetricMode::Exhaustive).unwrap();
            assert_eq!(
                (m.error_rate, m.mean_error_distance, m.max_error_distance),
                (0.0, 0.0, 0)
            );
        }
        for m in lib.models() {
            let r = adder_error_metrics(m, 8, 0, ErrorMetricMode::Exhaustive).unwrap();
            assert_eq!(r.error_rate, 0.0);
            assert_eq!(r.max_error_distance, 0);
        }
    }

    #[test]
    fn metrics_sampled_mode_is_seeded() {
        let lib = ModelLibrary::default();
        let m = lib.get("lpaa7").unwrap();
        let mode = ErrorMetricMode::Sampled {
            pairs: 10_000,
            seed: 3,
        };
        let a = adder_error_metrics(m, 37, 20, mode).unwrap();
        let b = adder_error_metrics(m, 37, 20, mode).unwrap();
        assert_eq!(a, b);
        assert!(a.error_rate > 0.0);
        assert!(adder_error_metrics(m, 16, 4, ErrorMetricMode::Exhaustive).is_err());
        let auto = adder_error_metrics(m, 8, 8, ErrorMetricMode::Auto { seed: 0 }).unwrap();
        assert_eq!(auto.pairs, 65_536);
    }
}
