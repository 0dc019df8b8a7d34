//! Two's-complement fixed-point formats and truncating quantization.
//!
//! A value `v` in format `Q(i.f)` is stored as the integer
//! `raw = floor(v * 2^f)` in a `W = i + f` bit two's-complement word; the
//! sign bit counts toward `i`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_INTEGER_BITS: u32 = 16;
pub const MAX_FRACTIONAL_BITS: u32 = 64;
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFormat")]
pub struct FxFormat {
    integer_bits: u32,
    fractional_bits: u32,
}

#[derive(Deserialize)]
struct RawFormat {
    integer_bits: u32,
    fractional_bits: u32,
}

impl TryFrom<RawFormat> for FxFormat {
    type Error = Error;

    fn try_from(raw: RawFormat) -> Result<Self> {
        FxFormat::new(raw.integer_bits, raw.fractional_bits)
    }
}

impl FxFormat {
    /// Acquisition-side default: Q4.33.
    pub const ACQUISITION: FxFormat = FxFormat {
        integer_bits: 4,
        fractional_bits: 33,
    };
    /// Reconstruction-side default: Q4.43.
    pub const RECONSTRUCTION: FxFormat = FxFormat {
        integer_bits: 4,
        fractional_bits: 43,
    };

    pub fn new(integer_bits: u32, fractional_bits: u32) -> Result<Self> {
        if !(1..=MAX_INTEGER_BITS).contains(&integer_bits)
            || fractional_bits > MAX_FRACTIONAL_BITS
            || integer_bits + fractional_bits > MAX_WIDTH
        {
            return Err(Error::config(format!(
                "invalid fixed-point format Q{integer_bits}.{fractional_bits} \
                 (need 1 <= i <= {MAX_INTEGER_BITS}, i + f <= {MAX_WIDTH})"
            )));
        }
        Ok(FxFormat {
            integer_bits,
            fractional_bits,
        })
    }

    pub fn integer_bits(&self) -> u32 {
        self.integer_bits
    }

    pub fn fractional_bits(&self) -> u32 {
        self.fractional_bits
    }

    pub fn width(&self) -> u32 {
        self.integer_bits + self.fractional_bits
    }

    /// Weight of one raw unit, `2^-f`.
    pub fn lsb(&self) -> f64 {
        (-(self.fractional_bits as f64)).exp2()
    }

    pub fn min_raw(&self) -> i64 {
        if self.width() == 64 {
            i64::MIN
        } else {
            -(1i64 << (self.width() - 1))
        }
    }

    pub fn max_raw(&self) -> i64 {
        if self.width() == 64 {
            i64::MAX
        } else {
            (1i64 << (self.width() - 1)) - 1
        }
    }

    /// Smallest representable value, `-2^(i-1)`.
    pub fn min_value(&self) -> f64 {
        -((self.integer_bits - 1) as f64).exp2()
    }

    /// Largest representable value, `2^(i-1) - 2^-f`.
    pub fn max_value(&self) -> f64 {
        ((self.integer_bits - 1) as f64).exp2() - self.lsb()
    }

    /// True if quantizing `v` cannot overflow. Truncation means every value
    /// strictly below `2^(i-1)` lands on a representable word.
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min_value() && v < ((self.integer_bits - 1) as f64).exp2()
    }

    pub fn fits_raw(&self, raw: i64) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }

    /// Mask selecting the low `W` bits of a word.
    pub fn mask(&self) -> u64 {
        if self.width() == 64 {
            u64::MAX
        } else {
            (1u64 << self.width()) - 1
        }
    }

    /// Two's-complement bit pattern of `raw`, restricted to `W` bits.
    pub fn to_bits(&self, raw: i64) -> u64 {
        (raw as u64) & self.mask()
    }

    /// Sign-extends a `W`-bit pattern back to a raw integer.
    pub fn from_bits(&self, bits: u64) -> i64 {
        let shift = 64 - self.width();
        (((bits & self.mask()) << shift) as i64) >> shift
    }
}

impl std::fmt::Display for FxFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q{}.{}", self.integer_bits, self.fractional_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FxWord {
    raw: i64,
    format: FxFormat,
}

impl FxWord {
    pub fn from_raw(raw: i64, format: FxFormat) -> Result<Self> {
        if !format.fits_raw(raw) {
            return Err(Error::config(format!(
                "raw word {raw} does not fit {format}"
            )));
        }
        Ok(FxWord { raw, format })
    }

    pub(crate) fn from_raw_unchecked(raw: i64, format: FxFormat) -> Self {
        debug_assert!(format.fits_raw(raw));
        FxWord { raw, format }
    }

    pub fn zero(format: FxFormat) -> Self {
        FxWord { raw: 0, format }
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    pub fn format(&self) -> FxFormat {
        self.format
    }

    pub fn bits(&self) -> u64 {
        self.format.to_bits(self.raw)
    }
}

/// Quantizes `v` by truncation toward negative infinity.
pub fn quantize(v: f64, fmt: FxFormat) -> Result<FxWord> {
    if !fmt.contains(v) {
        return Err(Error::Range {
            value: v,
            integer_bits: fmt.integer_bits,
            fractional_bits: fmt.fractional_bits,
        });
    }
    // Scaling by a power of two is exact, so `v < 2^(i-1)` keeps the
    // product below 2^(W-1).
    let raw = (v * (fmt.fractional_bits as f64).exp2()).floor() as i64;
    Ok(FxWord::from_raw_unchecked(raw, fmt))
}

/// `raw * 2^-f`. Exact whenever `|raw| < 2^53`; wider words round to the
/// nearest `f64` in the integer-to-float conversion.
pub fn dequantize(w: FxWord) -> f64 {
    w.raw as f64 * w.format.lsb()
}

/// A vector of raw words sharing one format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FxVector {
    format: FxFormat,
    raw: Vec<i64>,
}

impl FxVector {
    pub fn zeros(len: usize, format: FxFormat) -> Self {
        FxVector {
            format,
            raw: vec![0; len],
        }
    }

    pub fn from_raw(raw: Vec<i64>, format: FxFormat) -> Result<Self> {
        if let Some(bad) = raw.iter().find(|&&r| !format.fits_raw(r)) {
            return Err(Error::config(format!(
                "raw word {bad} does not fit {format}"
            )));
        }
        Ok(FxVector { format, raw })
    }

    pub fn quantize(values: &[f64], format: FxFormat) -> Result<Self> {
        let raw = values
            .iter()
            .map(|&v| quantize(v, format).map(|w| w.raw))
            .collect::<Result<Vec<_>>>()?;
        Ok(FxVector { format, raw })
    }

    pub fn dequantize(&self) -> Vec<f64> {
        let lsb = self.format.lsb();
        self.raw.iter().map(|&r| r as f64 * lsb).collect()
    }

    pub fn format(&self) -> FxFormat {
        self.format
    }

    pub fn raw(&self) -> &[i64] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<FxWord> {
        self.raw
            .get(i)
            .map(|&raw| FxWord::from_raw_unchecked(raw, self.format))
    }

    pub(crate) fn push(&mut self, w: FxWord) {
        debug_assert_eq!(w.format, self.format);
        self.raw.push(w.raw);
    }

    pub(crate) fn with_capacity(cap: usize, format: FxFormat) -> Self {
        FxVector {
            format,
            raw: Vec::with_capacity(cap),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(i: u32, f: u32) -> FxFormat {
        FxFormat::new(i, f).unwrap()
    }

    #[test]
    fn format_bounds() {
        assert!(FxFormat::new(0, 4).is_err());
        assert!(FxFormat::new(17, 4).is_err());
        assert!(FxFormat::new(4, 61).is_err());
        assert!(FxFormat::new(1, 63).is_ok());
        assert!(FxFormat::new(16, 48).is_ok());
        assert_eq!(q(4, 33).width(), 37);
        assert_eq!(q(2, 4).min_value(), -2.0);
        assert_eq!(q(2, 4).max_value(), 2.0 - 1.0 / 16.0);
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.0, q(4, 33)).unwrap().raw(), 0);
        assert_eq!(quantize(0.0, q(1, 0)).unwrap().raw(), 0);
        assert_eq!(quantize(0.5, q(4, 33)).unwrap().raw(), 1 << 32);
        let w = quantize(0.3, q(4, 4)).unwrap();
        assert_eq!(w.raw(), 4);
        assert_eq!(dequantize(w), 0.25);
        // floor, not toward zero
        assert_eq!(quantize(-0.3, q(4, 4)).unwrap().raw(), -5);
    }

    #[test]
    fn quantize_out_of_range() {
        let fmt = q(2, 4);
        assert!(quantize(2.0, fmt).is_err());
        assert!(quantize(-2.0, fmt).is_ok());
        assert!(quantize(-2.0001, fmt).is_err());
        assert!(quantize(f64::NAN, fmt).is_err());
        match quantize(5.0, fmt) {
            Err(Error::Range {
                value,
                integer_bits,
                fractional_bits,
            }) => {
                assert_eq!((value, integer_bits, fractional_bits), (5.0, 2, 4));
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize(FxWord::zero(q(4, 33))), 0.0);
        assert_eq!(
            dequantize(FxWord::from_raw(1 << 33, q(4, 33)).unwrap()),
            1.0
        );
        let fmt = q(2, 4);
        let min = FxWord::from_raw(-(1 << 5), fmt).unwrap();
        assert_eq!(dequantize(min), -2.0);
        assert!(FxWord::from_raw(1 << 5, fmt).is_err());
    }

    #[test]
    fn wide_format_top_of_range() {
        let fmt = q(1, 63);
        let below_one = 1.0 - f64::EPSILON / 2.0;
        assert_eq!(quantize(below_one, fmt).unwrap().raw(), i64::MAX - 1023);
        assert!(quantize(1.0, fmt).is_err());
        assert_eq!(quantize(-1.0, fmt).unwrap().raw(), i64::MIN);
    }

    #[test]
    fn bit_patterns_sign_extend() {
        let fmt = q(2, 6);
        assert_eq!(fmt.to_bits(-1), 0xFF);
        assert_eq!(fmt.from_bits(0xFF), -1);
        assert_eq!(fmt.from_bits(0x80), -128);
        assert_eq!(fmt.from_bits(0x7F), 127);
        let wide = q(16, 48);
        assert_eq!(wide.from_bits(wide.to_bits(i64::MIN)), i64::MIN);
    }

    #[test]
    fn round_trip_bound_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fmt in [q(4, 33), q(4, 43), q(2, 10), q(8, 20)] {
            let lo = fmt.min_value();
            let hi = -lo;
            for _ in 0..100_000 {
                let v: f64 = rng.gen_range(lo..hi);
                let back = dequantize(quantize(v, fmt).unwrap());
                assert!(back <= v);
                assert!(v - back < fmt.lsb(), "{v} {back} {fmt}");
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_and_truncating(a in -7.9f64..7.9, b in -7.9f64..7.9, f in 0u32..=40) {
            let fmt = q(4, f);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let wl = quantize(lo, fmt).unwrap();
            let wh = quantize(hi, fmt).unwrap();
            prop_assert!(wl.raw() <= wh.raw());
            prop_assert!(dequantize(wl) <= lo);
            prop_assert!(dequantize(wh) <= hi);
        }
    }
}
