//! Persistence: binary resource grids, path-set traces and CSV tables.

mod tables;

pub use tables::*;

use num_complex::Complex64;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use crate::channel_model::{Path, PathSet};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, TfGrid};

pub const GRID_MAGIC: &[u8; 4] = b"DDG1";
/// Magic, four `u32` dimensions and the `f64` subcarrier spacing.
pub const GRID_HEADER_LEN: usize = 4 + 4 * 4 + 8;

fn format_error(offset: u64, reason: impl Into<String>) -> Error {
    Error::Format {
        offset,
        reason: reason.into(),
    }
}

/// Writes a grid as `DDG1`: little-endian header, then `M·N` complex
/// values as `f32` pairs, symbol by symbol.
pub fn write_grid<W: Write>(mut w: W, grid: &TfGrid) -> Result<()> {
    let s = &grid.spec;
    let dims = [s.m, s.n, s.d_f, s.d_t];
    let mut header = Vec::with_capacity(GRID_HEADER_LEN);
    header.extend_from_slice(GRID_MAGIC);
    for d in dims {
        let v = u32::try_from(d)
            .map_err(|_| Error::config(format!("grid dimension {d} exceeds u32")))?;
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&s.delta_f_hz.to_le_bytes());
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(grid.data.len() * 8);
    for v in &grid.data {
        body.extend_from_slice(&(v.re as f32).to_le_bytes());
        body.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Reads everything `r` yields, keeping I/O failures apart from format ones.
fn read_all<R: Read>(mut r: R) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    Ok(buf)
}

fn take<const K: usize>(buf: &[u8], at: usize, what: &str) -> Result<[u8; K]> {
    buf.get(at..at + K)
        .map(|b| b.try_into().expect("slice length"))
        .ok_or_else(|| {
            format_error(
                at as u64,
                format!(
                    "truncated {what}: need {K} bytes, {} left",
                    buf.len().saturating_sub(at)
                ),
            )
        })
}

pub fn read_grid<R: Read>(r: R) -> Result<TfGrid> {
    let buf = read_all(r)?;
    let magic: [u8; 4] = take(&buf, 0, "magic")?;
    if &magic != GRID_MAGIC {
        return Err(format_error(
            0,
            format!("bad magic {magic:?}, expected \"DDG1\""),
        ));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = u32::from_le_bytes(take(&buf, 4 + 4 * i, "header")?) as usize;
    }
    let delta_f = f64::from_le_bytes(take(&buf, 20, "header")?);
    let spec = GridSpec {
        m: dims[0],
        n: dims[1],
        delta_f_hz: delta_f,
        d_f: dims[2],
        d_t: dims[3],
    };
    spec.validate()
        .map_err(|e| format_error(4, format!("invalid header: {e}")))?;

    let expected = GRID_HEADER_LEN as u64 + spec.len() as u64 * 8;
    let mut data = Vec::with_capacity(spec.len());
    for i in 0..spec.len() {
        let at = GRID_HEADER_LEN + 8 * i;
        let re = f32::from_le_bytes(take(&buf, at, "sample data")?);
        let im = f32::from_le_bytes(take(&buf, at + 4, "sample data")?);
        if !(re.is_finite() && im.is_finite()) {
            return Err(format_error(at as u64, format!("non-finite sample {i}")));
        }
        data.push(Complex64::new(re as f64, im as f64));
    }
    if buf.len() as u64 != expected {
        return Err(format_error(
            expected,
            format!(
                "{} trailing bytes after the sample data",
                buf.len() as u64 - expected
            ),
        ));
    }
    Ok(TfGrid { spec, data })
}

pub fn write_grid_file(path: &FsPath, grid: &TfGrid) -> Result<()> {
    write_grid(BufWriter::new(File::create(path)?), grid)
}

pub fn read_grid_file(path: &FsPath) -> Result<TfGrid> {
    read_grid(BufReader::new(File::open(path)?))
}

const TRACE_HEADER: &str = "# t_offset_s, then tau_s,nu_hz,re,im per path";

/// One record per line: `t_offset_s` followed by `tau_s, nu_hz, re, im` for
/// every path, comma separated. `#` starts a comment line.
pub fn write_trace<W: Write>(mut w: W, trace: &[PathSet]) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for set in trace {
        let mut line = format!("{}", set.t_offset_s);
        for p in &set.paths {
            line.push_str(&format!(",{},{},{},{}", p.tau_s, p.nu_hz, p.h.re, p.h.im));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<PathSet>> {
    let mut reader = BufReader::new(r);
    let mut out = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                format_error(offset, "line is not valid UTF-8")
            } else {
                e.into()
            }
        })?;
        if read == 0 {
            break;
        }
        let start = offset;
        offset += read as u64;
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() || body.starts_with('#') {
            continue;
        }
        out.push(parse_trace_record(body, start)?);
    }
    Ok(out)
}

fn parse_trace_record(body: &str, start: u64) -> Result<PathSet> {
    let mut values = Vec::new();
    let mut at = start;
    for field in body.split(',') {
        let v: f64 = field.trim().parse().map_err(|_| {
            format_error(at, format!("cannot parse {:?} as a number", field.trim()))
        })?;
        if !v.is_finite() {
            return Err(format_error(at, format!("non-finite value {field:?}")));
        }
        values.push(v);
        at += field.len() as u64 + 1;
    }
    if (values.len() - 1) % 4 != 0 {
        return Err(format_error(
            start,
            format!(
                "record has {} fields; expected 1 + 4 per path",
                values.len()
            ),
        ));
    }
    let paths = values[1..]
        .chunks_exact(4)
        .map(|c| Path {
            tau_s: c[0],
            nu_hz: c[1],
            h: Complex64::new(c[2], c[3]),
        })
        .collect();
    Ok(PathSet::new(paths, values[0]))
}

pub fn write_trace_file(path: &FsPath, trace: &[PathSet]) -> Result<()> {
    write_trace(BufWriter::new(File::create(path)?), trace)
}

pub fn read_trace_file(path: &FsPath) -> Result<Vec<PathSet>> {
    read_trace(File::open(path)?)
}
