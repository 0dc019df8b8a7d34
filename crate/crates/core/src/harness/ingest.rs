use std::path::Path;

use crate::{Error, Result};

/// ADC zero of MIT-BIH MLII recordings.
pub const MIT_BASELINE: f64 = 1024.0;
/// MIT-BIH gain, adu per mV.
pub const MIT_GAIN: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub resolution_bits: u32,
    /// Sorted truth R-peak sample indices.
    pub annotations: Option<Vec<usize>>,
}

impl EcgRecord {
    pub fn new(samples: Vec<f64>, fs: f64, resolution_bits: u32) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::config(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        Ok(EcgRecord {
            samples,
            fs,
            resolution_bits,
            annotations: None,
        })
    }

    pub fn with_annotations(mut self, mut ann: Vec<usize>) -> Result<Self> {
        ann.sort_unstable();
        ann.dedup();
        if let Some(&bad) = ann.iter().find(|&&i| i >= self.samples.len()) {
            return Err(Error::input(format!(
                "annotation at sample {bad} is past the end of a {}-sample record",
                self.samples.len()
            )));
        }
        self.annotations = Some(ann);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

/// Reads one sample per line, with an optional second column flagging
/// annotated R-peaks (`1`) and an optional header line.
pub fn load_csv(path: impl AsRef<Path>, fs: f64) -> Result<EcgRecord> {
    let path = path.as_ref();
    let mut samples = Vec::new();
    let mut ann = Vec::new();
    let mut any_flag_column = false;
    for (i, rec) in csv_reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(i + 1, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let Some(first) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        let value = match first.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            Err(_) if i == 0 => continue, // header
            _ => return Err(parse_err(path, line, format!("bad sample value `{first}`"))),
        };
        if rec.len() > 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 1 or 2 columns, got {}", rec.len()),
            ));
        }
        if let Some(flag) = rec.get(1) {
            any_flag_column = true;
            match flag {
                "0" => {}
                "1" => ann.push(samples.len()),
                other => {
                    return Err(parse_err(
                        path,
                        line,
                        format!("bad annotation flag `{other}`"),
                    ))
                }
            }
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::input(format!(
            "{} contains no samples",
            path.display()
        )));
    }
    let rec = EcgRecord::new(samples, fs, 0)?;
    if any_flag_column {
        rec.with_annotations(ann)
    } else {
        Ok(rec)
    }
}

/// Reads an annotation sidecar: one R-peak sample index per line.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, rec) in csv_reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let Some(first) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match first.parse::<usize>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(path, line, format!("bad sample index `{first}`"))),
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn write_annotations(path: impl AsRef<Path>, ann: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("sample\n");
    for a in ann {
        text.push_str(&format!("{a}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[inline]
fn sign_extend_12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

/// Unpacks one 3-byte group into its two 12-bit samples.
pub fn decode_212_triple(b: [u8; 3]) -> (i16, i16) {
    let s0 = (((b[1] & 0x0F) as u16) << 8) | b[0] as u16;
    let s1 = (((b[1] & 0xF0) as u16) << 4) | b[2] as u16;
    (sign_extend_12(s0), sign_extend_12(s1))
}

/// Decodes interleaved two-signal format 212 data. A trailing partial group
/// is an error.
pub fn decode_212(bytes: &[u8]) -> Result<Vec<i16>> {
    if !bytes.len().is_multiple_of(3) {
        return Err(Error::Format(format!(
            "format 212 data length {} is not a multiple of 3",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(bytes.len() / 3 * 2);
    for g in bytes.chunks_exact(3) {
        let (a, b) = decode_212_triple([g[0], g[1], g[2]]);
        out.push(a);
        out.push(b);
    }
    Ok(out)
}

/// Packs interleaved 12-bit samples (an even count, each in
/// `-2048..=2047`) into format 212.
pub fn encode_212(samples: &[i16]) -> Result<Vec<u8>> {
    if !samples.len().is_multiple_of(2) {
        return Err(Error::Format(
            "format 212 needs an even number of samples".into(),
        ));
    }
    let mut out = Vec::with_capacity(samples.len() / 2 * 3);
    for pair in samples.chunks_exact(2) {
        for &s in pair {
            if !(-2048..=2047).contains(&s) {
                return Err(Error::Format(format!("sample {s} does not fit 12 bits")));
            }
        }
        let (a, b) = ((pair[0] as u16) & 0x0FFF, (pair[1] as u16) & 0x0FFF);
        out.push((a & 0xFF) as u8);
        out.push(((a >> 8) as u8) | (((b >> 8) as u8) << 4));
        out.push((b & 0xFF) as u8);
    }
    Ok(out)
}

/// Reads `n_samples` of one channel from a two-signal format 212 file and
/// converts to millivolts with `(raw - 1024) / 200`.
pub fn load_mit212(
    path: impl AsRef<Path>,
    channel: usize,
    n_samples: usize,
    fs: f64,
) -> Result<EcgRecord> {
    let path = path.as_ref();
    if channel > 1 {
        return Err(Error::config(format!(
            "format 212 channel must be 0 or 1, got {channel}"
        )));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let needed = n_samples * 3;
    if bytes.len() < needed {
        return Err(Error::Format(format!(
            "{}: {} bytes hold fewer than {n_samples} sample frames",
            path.display(),
            bytes.len()
        )));
    }
    let samples = decode_212(&bytes[..needed])?
        .chunks_exact(2)
        .map(|pair| (pair[channel] as f64 - MIT_BASELINE) / MIT_GAIN)
        .collect();
    EcgRecord::new(samples, fs, 11)
}
