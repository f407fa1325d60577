//! CSV tables written by the pipeline and their readers.

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path as FsPath;

use crate::channel_model::Family;
use crate::dd_estimator::EstimatedPath;
use crate::dist_fit::{rician_k_factor, Selection};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::otfs_link::{BerCurve, BerPoint};
use crate::stationarity::{IntervalReport, SimilarityKind, SimilarityMatrix};

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Deserialize { err, .. } => Error::Format {
            offset,
            reason: err.to_string(),
        },
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Format {
            offset,
            reason: format!("row has {len} fields, expected {expected_len}"),
        },
        csv::ErrorKind::Utf8 { err, .. } => Error::Format {
            offset,
            reason: err.to_string(),
        },
        other => Error::Format {
            offset,
            reason: format!("{other:?}"),
        },
    }
}

pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: DeserializeOwned>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_error))
        .collect()
}

pub fn write_rows_file<T: Serialize>(path: &FsPath, rows: &[T]) -> Result<()> {
    write_rows(BufWriter::new(File::create(path)?), rows)
}

pub fn read_rows_file<T: DeserializeOwned>(path: &FsPath) -> Result<Vec<T>> {
    read_rows(File::open(path)?)
}

/// One estimation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: usize,
    pub time_s: f64,
    pub paths: usize,
    pub noise_floor: f64,
    pub failures: usize,
    pub residual_relative: f64,
}

/// One estimated path in one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub window: usize,
    pub time_s: f64,
    pub path: usize,
    pub l_hat: f64,
    pub k_hat: f64,
    pub tau_s: f64,
    pub nu_hz: f64,
    pub h_re: f64,
    pub h_im: f64,
    pub power_db: f64,
    pub peak_k: usize,
    pub peak_l: usize,
    pub residual_power_db: f64,
}

impl PathRow {
    pub fn new(
        window: usize,
        time_s: f64,
        path: usize,
        p: &EstimatedPath,
        spec: &GridSpec,
    ) -> Self {
        PathRow {
            window,
            time_s,
            path,
            l_hat: p.l_hat,
            k_hat: p.k_hat,
            tau_s: p.tau_s(spec),
            nu_hz: p.nu_hz(spec),
            h_re: p.h_hat.re,
            h_im: p.h_hat.im,
            power_db: 10.0 * p.h_hat.norm_sqr().log10(),
            peak_k: p.peak_index.0,
            peak_l: p.peak_index.1,
            residual_power_db: p.residual_power_db,
        }
    }

    pub fn estimated(&self) -> EstimatedPath {
        EstimatedPath {
            l_hat: self.l_hat,
            k_hat: self.k_hat,
            h_hat: Complex64::new(self.h_re, self.h_im),
            peak_index: (self.peak_k, self.peak_l),
            residual_power_db: self.residual_power_db,
        }
    }
}

/// Paths per window, given the window list and the path rows.
pub fn group_paths(windows: &[WindowRow], rows: &[PathRow]) -> Result<Vec<Vec<EstimatedPath>>> {
    let mut out = vec![Vec::new(); windows.len()];
    for r in rows {
        let slot = windows
            .iter()
            .position(|w| w.window == r.window)
            .ok_or_else(|| {
                Error::config(format!("path row refers to unknown window {}", r.window))
            })?;
        out[slot].push(r.estimated());
    }
    Ok(out)
}

/// Dense similarity matrix: the corner cell names the kind, the first row
/// and column carry the time axis.
pub fn write_similarity<W: Write>(w: W, sim: &SimilarityMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let kind = match sim.kind {
        SimilarityKind::Cdd => "cdd",
        SimilarityKind::DdTcc => "dd-tcc",
    };
    let mut header = vec![kind.to_string()];
    header.extend(sim.time_axis.iter().map(|t| t.to_string()));
    out.write_record(&header).map_err(csv_error)?;
    for i in 0..sim.size {
        let mut row = vec![sim.time_axis[i].to_string()];
        row.extend((0..sim.size).map(|j| sim.get(i, j).to_string()));
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_similarity<R: Read>(r: R) -> Result<SimilarityMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut records = reader.records();
    let header = records.next().ok_or_else(|| Error::Format {
        offset: 0,
        reason: "empty similarity file".into(),
    })?;
    let header = header.map_err(csv_error)?;
    let kind = match header.get(0) {
        Some("cdd") => SimilarityKind::Cdd,
        Some("dd-tcc") => SimilarityKind::DdTcc,
        other => {
            return Err(Error::Format {
                offset: 0,
                reason: format!("unknown similarity kind {other:?}"),
            })
        }
    };
    let number = |s: &str, offset: u64| {
        s.parse::<f64>().map_err(|_| Error::Format {
            offset,
            reason: format!("cannot parse {s:?} as a number"),
        })
    };
    let time_axis = header
        .iter()
        .skip(1)
        .map(|s| number(s, 0))
        .collect::<Result<Vec<f64>>>()?;
    let size = time_axis.len();
    let mut entries = Vec::with_capacity(size * size);
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_error)?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if i >= size {
            return Err(Error::Format {
                offset,
                reason: format!("more than {size} matrix rows"),
            });
        }
        if number(&rec[0], offset)?.to_bits() != time_axis[i].to_bits() {
            return Err(Error::Format {
                offset,
                reason: format!("row {i} time does not match the header"),
            });
        }
        for s in rec.iter().skip(1) {
            entries.push(number(s, offset)?);
        }
    }
    if entries.len() != size * size {
        return Err(Error::Format {
            offset: 0,
            reason: format!("expected {size} rows of {size} values"),
        });
    }
    Ok(SimilarityMatrix {
        size,
        entries,
        kind,
        time_axis,
    })
}

pub fn write_similarity_file(path: &FsPath, sim: &SimilarityMatrix) -> Result<()> {
    write_similarity(BufWriter::new(File::create(path)?), sim)
}

pub fn read_similarity_file(path: &FsPath) -> Result<SimilarityMatrix> {
    read_similarity(File::open(path)?)
}

/// One interval of a report; a report without intervals keeps a single row
/// with the run fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub scope: String,
    pub alpha: f64,
    pub first_window: Option<usize>,
    pub last_window: Option<usize>,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub length_ms: Option<f64>,
}

pub fn interval_rows(scope: &str, report: &IntervalReport) -> Vec<IntervalRow> {
    if report.runs.is_empty() {
        return vec![IntervalRow {
            scope: scope.into(),
            alpha: report.alpha,
            first_window: None,
            last_window: None,
            start_s: None,
            end_s: None,
            length_ms: None,
        }];
    }
    report
        .runs
        .iter()
        .zip(&report.intervals)
        .map(|(&(i, j), &(a, b))| IntervalRow {
            scope: scope.into(),
            alpha: report.alpha,
            first_window: Some(i),
            last_window: Some(j),
            start_s: Some(a),
            end_s: Some(b),
            length_ms: Some((b - a) * 1e3),
        })
        .collect()
}

/// Regroups rows into `(scope, report)` pairs in file order.
pub fn reports_from_rows(rows: &[IntervalRow]) -> Result<Vec<(String, IntervalReport)>> {
    // (scope, alpha, window runs, time spans)
    type Group = (String, f64, Vec<(usize, usize)>, Vec<(f64, f64)>);
    let mut out: Vec<Group> = Vec::new();
    for r in rows {
        let same = out
            .last()
            .is_some_and(|(s, a, _, _)| *s == r.scope && a.to_bits() == r.alpha.to_bits());
        if !same {
            out.push((r.scope.clone(), r.alpha, Vec::new(), Vec::new()));
        }
        let group = out.last_mut().expect("group pushed above");
        match (r.first_window, r.last_window, r.start_s, r.end_s) {
            (Some(i), Some(j), Some(a), Some(b)) => {
                group.2.push((i, j));
                group.3.push((a, b));
            }
            (None, None, None, None) => {}
            _ => {
                return Err(Error::config(format!(
                    "interval row for {} is partially empty",
                    r.scope
                )))
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|(s, a, runs, iv)| (s, IntervalReport::from_parts(a, runs, iv)))
        .collect())
}

/// Threshold summary in the layout of the interval tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummaryRow {
    pub scope: String,
    pub alpha: f64,
    pub intervals: usize,
    pub t_max_ms: f64,
    pub t_min_ms: f64,
    pub t_mean_ms: f64,
}

impl IntervalSummaryRow {
    pub fn new(scope: &str, report: &IntervalReport) -> Self {
        IntervalSummaryRow {
            scope: scope.into(),
            alpha: report.alpha,
            intervals: report.runs.len(),
            t_max_ms: report.t_max_ms,
            t_min_ms: report.t_min_ms,
            t_mean_ms: report.t_mean_ms,
        }
    }
}

/// Power-weighted position of one tracked path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub path: usize,
    pub points: usize,
    pub l_bar: f64,
    pub k_bar: f64,
    pub tau_ns: f64,
    pub nu_hz: f64,
    pub mean_power_db: f64,
}

/// One point of one path track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub path: usize,
    pub window: usize,
    pub l_hat: f64,
    pub k_hat: f64,
    pub h_re: f64,
    pub h_im: f64,
}

/// One fitted family of one path, in the layout of the KS table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub path: usize,
    pub family: Family,
    pub param1: Option<f64>,
    pub param2: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub k_factor_db: Option<f64>,
    pub samples: usize,
    pub selected: bool,
    pub note: String,
}

pub fn fit_rows(path: usize, selection: &Selection) -> Vec<FitRow> {
    selection
        .fits
        .iter()
        .map(|(family, fit)| match fit {
            Ok(f) => {
                let k_factor_db = match f.family {
                    Family::Rician => rician_k_factor(f.params[0], f.params[1])
                        .ok()
                        .map(|(_, db)| db),
                    _ => None,
                };
                let selected = *family == selection.family();
                let note = if selected && selection.low_confidence {
                    "low-confidence".to_string()
                } else if selected && *family != selection.min_ks_family {
                    format!("nesting rule over {:?}", selection.min_ks_family)
                } else {
                    String::new()
                };
                FitRow {
                    path,
                    family: *family,
                    param1: f.params.first().copied(),
                    param2: f.params.get(1).copied(),
                    ks_statistic: Some(f.ks_statistic),
                    log_likelihood: Some(f.log_likelihood),
                    k_factor_db,
                    samples: f.sample_count,
                    selected,
                    note,
                }
            }
            Err(msg) => FitRow {
                path,
                family: *family,
                param1: None,
                param2: None,
                ks_statistic: None,
                log_likelihood: None,
                k_factor_db: None,
                samples: 0,
                selected: false,
                note: format!("failed: {msg}"),
            },
        })
        .collect()
}

/// One BER point of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub channel: String,
    pub lag_ms: Option<f64>,
    pub snr_db: f64,
    pub ebn0_db: f64,
    pub frames: usize,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerRow {
    pub fn new(channel: &str, lag_ms: Option<f64>, p: &BerPoint) -> Self {
        let (ci_low, ci_high) = p.wilson95();
        BerRow {
            channel: channel.into(),
            lag_ms,
            snr_db: p.snr_db,
            ebn0_db: p.ebn0_db(),
            frames: p.frame_errors.len(),
            bits: p.bits,
            errors: p.bit_errors,
            ber: p.ber(),
            ci_low,
            ci_high,
        }
    }
}

pub fn ber_rows(curve: &BerCurve) -> Vec<BerRow> {
    curve
        .points
        .iter()
        .map(|p| BerRow::new(&curve.channel, curve.lag_ms, p))
        .collect()
}
