//! Image and trace files.
//!
//! PGM images are 16-bit binary (P5, big-endian samples). The first image
//! row holds grid row `j = 0`, so rows run top-to-bottom in increasing `y`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::solver::SolveResult;

pub const TRACE_HEADER: &str = "sweep,i,residual,mu,skipped,R_n,bregman";

/// Quantizes `field` linearly from `range` (default: its min and max) onto
/// `0..=65535`, clamping values outside the range.
pub fn quantize(field: &GridFunction, range: Option<(f64, f64)>) -> Vec<u16> {
    let (lo, hi) = range.unwrap_or_else(|| {
        let v = field.values();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    field
        .values()
        .iter()
        .map(|&v| {
            if hi > lo {
                let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                (t * 65535.0).round() as u16
            } else {
                32768
            }
        })
        .collect()
}

pub fn write_pgm(field: &GridFunction, path: &Path, range: Option<(f64, f64)>) -> Result<()> {
    let spec = field.spec();
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n65535\n", spec.nx(), spec.ny())?;
    for q in quantize(field, range) {
        w.write_all(&q.to_be_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a 16-bit P5 file written by [`write_pgm`]: `(width, height, samples)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || Error::Config(format!("{} is not a 16-bit P5 image", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos..pos + 2 * w * h).ok_or_else(bad)?;
    let samples = data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, samples))
}

/// One row per equation visit. `R_n` and `bregman` are the values of the
/// row's sweep; `bregman` is empty when no reference was supplied.
pub fn trace_csv(result: &SolveResult) -> String {
    let mut out = String::with_capacity(64 * (result.steps.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in &result.steps {
        let sweep = result.sweeps.get(s.sweep);
        let rn = sweep.map(|r| format!("{:.16e}", r.residual_sum)).unwrap_or_default();
        let breg = sweep.and_then(|r| r.bregman).map(|b| format!("{b:.16e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{},{},{}\n",
            s.sweep,
            s.index,
            s.residual,
            s.mu,
            u8::from(s.skipped),
            rn,
            breg
        ));
    }
    out
}

pub fn write_trace_csv(result: &SolveResult, path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv(result))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub index: usize,
    pub residual: f64,
    pub mu: f64,
    pub skipped: bool,
    pub residual_sum: f64,
    pub bregman: Option<f64>,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Config(format!("{}: unexpected trace header", path.display())));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let bad = || Error::Config(format!("{}: malformed row {}", path.display(), k + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            Ok(TraceRow {
                sweep: f[0].parse().map_err(|_| bad())?,
                index: f[1].parse().map_err(|_| bad())?,
                residual: f[2].parse().map_err(|_| bad())?,
                mu: f[3].parse().map_err(|_| bad())?,
                skipped: f[4] == "1",
                residual_sum: f[5].parse().map_err(|_| bad())?,
                bregman: if f[6].is_empty() { None } else { Some(f[6].parse().map_err(|_| bad())?) },
            })
        })
        .collect()
}
