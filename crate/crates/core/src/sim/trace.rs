//! Per-frame trace records and sweep rows, and their CSV form.
//!
//! Floats are written in scientific notation with 9 significant digits,
//! booleans as 0/1, missing values as empty cells. Lines end in `\n`.

use std::io::Write;
use std::path::Path;

use crate::energy_management::{CaseLabel, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub frame: u64,
    /// Epoch index on awake frames that produced a controller decision.
    pub epoch: Option<u64>,
    pub time: f64,
    /// Stored energy at the start of the frame, joules.
    pub energy: f64,
    pub voltage: f64,
    pub alpha: f64,
    pub upsilon: f64,
    pub tau: f64,
    pub h_true: f64,
    pub h_est: Option<f64>,
    /// Average amplifier power α·Υ/θ(Υ), watts.
    pub p_cons: f64,
    /// Average sensor-module power over the frame, watts.
    pub p_sensor: f64,
    pub awake: bool,
    pub brownout: bool,
    pub case: Option<CaseLabel>,
}

pub const TRACE_HEADER: [&str; 15] = [
    "frame",
    "epoch",
    "time_s",
    "energy_j",
    "voltage_v",
    "alpha",
    "upsilon_w",
    "tau",
    "h_true",
    "h_est",
    "p_cons_w",
    "p_sensor_w",
    "awake",
    "brownout",
    "case",
];

/// Converged operating point of one scheme at one attenuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub attenuation_db: f64,
    pub h: f64,
    pub scheme: Scheme,
    pub alpha: f64,
    pub upsilon: f64,
    pub tau: f64,
    pub p_cons: f64,
    pub case: Option<CaseLabel>,
    pub converged: bool,
    pub epochs: u64,
}

pub const SWEEP_HEADER: [&str; 10] = [
    "attenuation_db",
    "h",
    "scheme",
    "alpha",
    "upsilon_w",
    "tau",
    "p_cons_w",
    "case",
    "converged",
    "epochs",
];

pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Proposed => "proposed",
        Scheme::NoDutyCycling => "no_duty_cycling",
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_trace<W: Write>(records: &[TraceRecord], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.frame.to_string(),
            r.epoch.map_or(String::new(), |e| e.to_string()),
            fmt_float(r.time),
            fmt_float(r.energy),
            fmt_float(r.voltage),
            fmt_float(r.alpha),
            fmt_float(r.upsilon),
            fmt_float(r.tau),
            fmt_float(r.h_true),
            r.h_est.map_or(String::new(), fmt_float),
            fmt_float(r.p_cons),
            fmt_float(r.p_sensor),
            fmt_bool(r.awake).to_string(),
            fmt_bool(r.brownout).to_string(),
            r.case.map_or("", |c| c.as_str()).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("trace is ASCII")
}

/// Writes the trace CSV to `path`.
pub fn emit_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(records, std::io::BufWriter::new(f)).map_err(|e| csv_err(path, e))
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            format!("{:.2}", r.attenuation_db),
            fmt_float(r.h),
            scheme_name(r.scheme).to_string(),
            fmt_float(r.alpha),
            fmt_float(r.upsilon),
            fmt_float(r.tau),
            fmt_float(r.p_cons),
            r.case.map_or("", |c| c.as_str()).to_string(),
            fmt_bool(r.converged).to_string(),
            r.epochs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_to_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("sweep is ASCII")
}

pub fn emit_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep(rows, std::io::BufWriter::new(f)).map_err(|e| csv_err(path, e))
}

/// Parses a trace CSV written by [`write_trace`].
pub fn parse_trace(text: &str, name: &str) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse {
        path: name.into(),
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Schema {
            path: name.into(),
            message: format!("unexpected trace header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: name.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let perr = |m: String| Error::Parse {
            path: name.into(),
            line,
            message: m,
        };
        let f = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| perr(format!("bad number {:?} in {}", &rec[i], TRACE_HEADER[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let b = |i: usize| -> Result<bool> {
            match &rec[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(perr(format!("bad flag {other:?} in {}", TRACE_HEADER[i]))),
            }
        };
        let int = |i: usize| -> Result<u64> {
            rec[i].parse().map_err(|_| perr(format!("bad integer {:?} in {}", &rec[i], TRACE_HEADER[i])))
        };
        out.push(TraceRecord {
            frame: int(0)?,
            epoch: if rec[1].is_empty() { None } else { Some(int(1)?) },
            time: f(2)?,
            energy: f(3)?,
            voltage: f(4)?,
            alpha: f(5)?,
            upsilon: f(6)?,
            tau: f(7)?,
            h_true: f(8)?,
            h_est: opt(9)?,
            p_cons: f(10)?,
            p_sensor: f(11)?,
            awake: b(12)?,
            brownout: b(13)?,
            case: match &rec[14] {
                "" => None,
                "I" => Some(CaseLabel::I),
                "II" => Some(CaseLabel::II),
                "III" => Some(CaseLabel::III),
                other => return Err(perr(format!("bad case label {other:?}"))),
            },
        });
    }
    Ok(out)
}
