//! CSV traces and summaries.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! trace back gives the recorded values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use genprior_core::{IterRecord, RunTrace};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub const TRACE_HEADER: &str =
    "t,objective,lagrangian,feas_gap,sigma,step_w,step_z,stop_metric,dist_w,dist_z,wall_ns";
pub const SUMMARY_HEADER: &str = "algo,final_obj,final_gap,iters,wall_ns,eta_hat,plateau";

/// One trace row, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub objective: f64,
    pub lagrangian: f64,
    pub feas_gap: f64,
    pub sigma: f64,
    pub step_w: f64,
    pub step_z: f64,
    pub stop_metric: f64,
    pub dist_w: Option<f64>,
    pub dist_z: Option<f64>,
    pub wall_ns: u64,
}

impl From<&IterRecord> for TraceRow {
    fn from(r: &IterRecord) -> Self {
        Self {
            t: r.t,
            objective: r.objective,
            lagrangian: r.lagrangian,
            feas_gap: r.feas_gap,
            sigma: r.sigma,
            step_w: r.step_w,
            step_z: r.step_z,
            stop_metric: r.stop_metric,
            dist_w: r.dist_w,
            dist_z: r.dist_z,
            wall_ns: r.wall_ns,
        }
    }
}

pub fn rows(trace: &RunTrace) -> Vec<TraceRow> {
    trace.records.iter().map(TraceRow::from).collect()
}

pub fn write_trace<W: Write>(out: W, trace: &RunTrace) -> Result<(), AppError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER.split(','))?;
    for row in rows(trace) {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn trace_to_string(trace: &RunTrace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, AppError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(AppError::config(format!("unexpected trace header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(AppError::from)).collect()
}

pub fn save_trace(path: &Path, trace: &RunTrace) -> Result<(), AppError> {
    crate::format::write(path, &trace_to_string(trace))
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>, AppError> {
    read_trace(crate::format::read(path)?.as_bytes())
}

/// Final state of one run, as a summary CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    pub final_obj: f64,
    pub final_gap: f64,
    pub iters: usize,
    pub wall_ns: u64,
    /// Blank when the trace admits no rate fit.
    pub eta_hat: Option<f64>,
    pub plateau: Option<f64>,
}

pub fn summary_to_string(rows: &[SummaryRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER.split(',')).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, AppError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|row| row.map_err(AppError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize, planted: bool) -> IterRecord {
        IterRecord {
            t,
            objective: 0.1 + t as f64 / 3.0,
            lagrangian: 1e-17 * t as f64,
            feas_gap: std::f64::consts::PI / t as f64,
            sigma: 1.0 / (t as f64 * 7.0),
            step_w: 2.0f64.sqrt(),
            step_z: 1e300,
            stop_metric: 5e-324,
            dist_w: planted.then_some(0.3),
            dist_z: planted.then_some(-0.0),
            wall_ns: 12345678901,
            lambda_norm: 0.0,
        }
    }

    #[test]
    fn header_and_blank_distances() {
        let trace = RunTrace {
            records: vec![record(1, false)],
            stages: vec![],
        };
        let text = trace_to_string(&trace);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[8], "");
        assert_eq!(fields[9], "");
    }

    #[test]
    fn round_trip_is_exact() {
        let trace = RunTrace {
            records: (1..=5).map(|t| record(t, t % 2 == 0)).collect(),
            stages: vec![],
        };
        let back = read_trace(trace_to_string(&trace).as_bytes()).unwrap();
        assert_eq!(back, rows(&trace));
        assert!(back[1].dist_z.unwrap().is_sign_negative());
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_round_trip() {
        let rows = vec![
            SummaryRow {
                algo: "admm".into(),
                final_obj: 1e-9,
                final_gap: 0.5,
                iters: 10,
                wall_ns: 0,
                eta_hat: Some(0.9),
                plateau: Some(0.0),
            },
            SummaryRow {
                algo: "gd".into(),
                final_obj: 2.0,
                final_gap: 0.0,
                iters: 3,
                wall_ns: 0,
                eta_hat: None,
                plateau: None,
            },
        ];
        let text = summary_to_string(&rows);
        assert!(text.starts_with(SUMMARY_HEADER));
        assert_eq!(read_summary(text.as_bytes()).unwrap(), rows);
    }
}
