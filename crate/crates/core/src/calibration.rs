//! Parameter estimation from bench measurements and ingestion of the
//! measured curve tables.
//!
//! Every fit is a closed-form linear least-squares problem in transformed
//! coordinates: log-log for path loss, log-linear for leakage and linear
//! (through the origin) for the mode loads.
//!
//! CSV schemas, all comma separated with a header row:
//!
//! | kind      | columns                                         |
//! |-----------|-------------------------------------------------|
//! | path loss | `distance_m,attenuation_db`                     |
//! | leakage   | `time_s,voltage_v`                              |
//! | loads     | `mode,voltage_v,power_w` (mode: idle/active/rx/tx) |
//! | PAE       | `p_tx_mw,pae`                                   |
//! | I-V       | blank cell then receive power in dBm; each row is volts then mA |

use std::path::Path;

use crate::device_models::{
    HarvesterIvSurface, LoadTable, ModeDurations, ModeLoad, PaeCurve, SensorMode,
};
use crate::error::{Error, Result};
use crate::units::attenuation_db_to_ratio;

/// Minimum number of rows accepted by any fit.
pub const MIN_ROWS: usize = 3;

/// Monotonicity slack for I-V tables, as a fraction of the column maximum.
pub const IV_MONOTONE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossFit {
    pub g_ref: f64,
    pub exponent: f64,
    /// RMS residual of `ln h`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageFit {
    /// Ohms; infinite when the trace shows no measurable decay.
    pub r_leak: f64,
    /// RMS residual of `ln V`.
    pub residual: f64,
}

/// Voltage-power samples `(V, W)` for each sensor mode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadTraces {
    pub idle: Vec<(f64, f64)>,
    pub active: Vec<(f64, f64)>,
    pub receive: Vec<(f64, f64)>,
    pub transmit: Vec<(f64, f64)>,
}

impl LoadTraces {
    pub fn mode(&self, m: SensorMode) -> &[(f64, f64)] {
        match m {
            SensorMode::Idle => &self.idle,
            SensorMode::Active => &self.active,
            SensorMode::Receive => &self.receive,
            SensorMode::Transmit => &self.transmit,
        }
    }

    pub fn mode_mut(&mut self, m: SensorMode) -> &mut Vec<(f64, f64)> {
        match m {
            SensorMode::Idle => &mut self.idle,
            SensorMode::Active => &mut self.active,
            SensorMode::Receive => &mut self.receive,
            SensorMode::Transmit => &mut self.transmit,
        }
    }
}

struct LineFit {
    intercept: f64,
    slope: f64,
    rms: f64,
    slope_stderr: f64,
}

fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let scale = xs.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    if !(sxx > (scale * 1e-12).powi(2) * n) {
        return Err(Error::fit("design matrix is rank deficient (all abscissae equal)"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let rms = (sse / n).sqrt();
    let slope_stderr = if n > 2.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        intercept,
        slope,
        rms,
        slope_stderr,
    })
}

/// Least-squares `c` in `y = c·x`.
fn origin_fit(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if !(sxx > 0.0) {
        return Err(Error::fit("regressor is identically zero"));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}

fn check_rows(n: usize, what: &str) -> Result<()> {
    if n < MIN_ROWS {
        return Err(Error::fit(format!(
            "{what} needs at least {MIN_ROWS} rows, got {n}"
        )));
    }
    Ok(())
}

/// Fits `h = G / d^ν` to `(distance m, h)` samples.
pub fn fit_path_loss(samples: &[(f64, f64)]) -> Result<PathLossFit> {
    check_rows(samples.len(), "path-loss fit")?;
    if let Some(&(d, h)) = samples.iter().find(|(d, h)| !(*d > 0.0 && *h > 0.0)) {
        return Err(Error::fit(format!(
            "path-loss samples need d > 0 and h > 0 (got d={d}, h={h})"
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let f = line_fit(&xs, &ys)?;
    Ok(PathLossFit {
        g_ref: f.intercept.exp(),
        exponent: -f.slope,
        residual: f.rms,
    })
}

/// Fits `V(t) = V(0)·exp(−t/(R·C))` to `(time s, volts)` samples.
pub fn fit_leakage(samples: &[(f64, f64)], capacitance: f64) -> Result<LeakageFit> {
    check_rows(samples.len(), "leakage fit")?;
    if !(capacitance > 0.0) {
        return Err(Error::fit(format!("capacitance must be > 0, got {capacitance}")));
    }
    if let Some(&(t, v)) = samples.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::fit(format!(
            "leakage trace has non-positive voltage {v} V at t={t} s"
        )));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::fit("leakage trace time stamps must be strictly increasing"));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let f = line_fit(&xs, &ys)?;
    let r_leak = if f.slope < 0.0 {
        -1.0 / (f.slope * capacitance)
    } else if f.slope == 0.0 || f.slope <= 3.0 * f.slope_stderr {
        // no measurable leakage
        f64::INFINITY
    } else {
        return Err(Error::fit(format!(
            "voltage rises over the trace (slope {:.3e} 1/s); not a discharge",
            f.slope
        )));
    };
    Ok(LeakageFit {
        r_leak,
        residual: f.rms,
    })
}

/// Fits the per-mode `(γ, ζ)` loads.
///
/// The idle trace gives `ζ(idle)` from `P = ζ·V` (idle has no resistive
/// part). The active mode shares the idle constant-current draw, so `γ` is
/// fitted from `P_active − ζ(idle)·V = V²/γ`. Receive and transmit add the
/// radio's constant current on top of the resistive load:
/// `P_mode − V²/γ = ζ(mode)·V`.
pub fn fit_loads(traces: &LoadTraces, durations: ModeDurations) -> Result<LoadTable> {
    for m in SensorMode::ALL {
        let n = traces.mode(m).len();
        if n == 0 {
            return Err(Error::fit(format!("missing {m} load trace")));
        }
        check_rows(n, &format!("{m} load fit"))?;
        if let Some(&(v, p)) = traces.mode(m).iter().find(|(v, p)| !(*v > 0.0) || !p.is_finite()) {
            return Err(Error::fit(format!(
                "{m} trace has invalid sample V={v}, P={p}"
            )));
        }
    }
    let split = |m: SensorMode| -> (Vec<f64>, Vec<f64>) { traces.mode(m).iter().copied().unzip() };

    let (v, p) = split(SensorMode::Idle);
    let zeta_idle = origin_fit(&v, &p)?.max(0.0);

    let (v, p) = split(SensorMode::Active);
    let v2: Vec<f64> = v.iter().map(|x| x * x).collect();
    let excess: Vec<f64> = v.iter().zip(&p).map(|(v, p)| p - zeta_idle * v).collect();
    let conductance = origin_fit(&v2, &excess)?;
    let gamma = if conductance > 0.0 {
        1.0 / conductance
    } else {
        f64::INFINITY
    };
    let g = conductance.max(0.0);

    let radio = |m: SensorMode| -> Result<f64> {
        let (v, p) = split(m);
        let rest: Vec<f64> = v.iter().zip(&p).map(|(v, p)| p - g * v * v).collect();
        Ok(origin_fit(&v, &rest)?.max(0.0))
    };
    let zeta_rx = radio(SensorMode::Receive)?;
    let zeta_tx = radio(SensorMode::Transmit)?;

    LoadTable::new(
        ModeLoad::new(f64::INFINITY, zeta_idle),
        ModeLoad::new(gamma, zeta_idle),
        ModeLoad::new(gamma, zeta_rx),
        ModeLoad::new(gamma, zeta_tx),
        durations,
    )
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Splits a CSV into rows of raw string cells with their 1-based line numbers.
fn rows(text: &str, name: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for rec in reader(text).records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: name.to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn number(cell: &str, name: &str, line: usize) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::Parse {
        path: name.to_string(),
        line,
        message: format!("expected a number, found {cell:?}"),
    })
}

fn schema(name: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: name.to_string(),
        message: message.into(),
    }
}

fn expect_header(rows: &[(usize, Vec<String>)], name: &str, header: &[&str]) -> Result<()> {
    let Some((_, first)) = rows.first() else {
        return Err(schema(name, "file is empty"));
    };
    if first.len() != header.len() || first.iter().zip(header).any(|(a, b)| a != b) {
        return Err(schema(
            name,
            format!("expected header {:?}, found {:?}", header.join(","), first.join(",")),
        ));
    }
    Ok(())
}

/// Parses a two-column numeric trace with the given header.
fn two_columns(text: &str, name: &str, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let rows = rows(text, name)?;
    expect_header(&rows, name, &header)?;
    rows[1..]
        .iter()
        .map(|(line, cells)| {
            if cells.len() != 2 {
                return Err(schema(
                    name,
                    format!("line {line}: expected 2 columns, found {}", cells.len()),
                ));
            }
            Ok((number(&cells[0], name, *line)?, number(&cells[1], name, *line)?))
        })
        .collect()
}

/// `(distance m, h)` samples from a `distance_m,attenuation_db` trace.
pub fn parse_path_loss_trace(text: &str, name: &str) -> Result<Vec<(f64, f64)>> {
    Ok(two_columns(text, name, ["distance_m", "attenuation_db"])?
        .into_iter()
        .map(|(d, db)| (d, attenuation_db_to_ratio(db)))
        .collect())
}

/// `(time s, volts)` samples from a `time_s,voltage_v` trace.
pub fn parse_leakage_trace(text: &str, name: &str) -> Result<Vec<(f64, f64)>> {
    two_columns(text, name, ["time_s", "voltage_v"])
}

pub fn parse_load_traces(text: &str, name: &str) -> Result<LoadTraces> {
    let rows = rows(text, name)?;
    expect_header(&rows, name, &["mode", "voltage_v", "power_w"])?;
    let mut traces = LoadTraces::default();
    for (line, cells) in &rows[1..] {
        if cells.len() != 3 {
            return Err(schema(
                name,
                format!("line {line}: expected 3 columns, found {}", cells.len()),
            ));
        }
        let mode = SensorMode::ALL
            .into_iter()
            .find(|m| m.name() == cells[0])
            .ok_or_else(|| {
                schema(name, format!("line {line}: unknown mode {:?}", cells[0]))
            })?;
        let v = number(&cells[1], name, *line)?;
        let p = number(&cells[2], name, *line)?;
        traces.mode_mut(mode).push((v, p));
    }
    Ok(traces)
}

/// Parses a `p_tx_mw,pae` table.
pub fn parse_pae_curve(text: &str, name: &str) -> Result<PaeCurve> {
    let rows = two_columns(text, name, ["p_tx_mw", "pae"])?;
    for (i, &(p, e)) in rows.iter().enumerate() {
        if !(p > 0.0) || !(e > 0.0 && e <= 1.0) {
            return Err(Error::Invariant {
                path: name.to_string(),
                row: i + 1,
                column: if p > 0.0 { 2 } else { 1 },
                message: format!("need p_tx > 0 and PAE in (0, 1], got {p} mW, {e}"),
            });
        }
    }
    if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(schema(name, "output power column must be strictly ascending"));
    }
    PaeCurve::new(rows.into_iter().map(|(p, e)| (p * 1e-3, e)).collect())
}

/// Parses and validates a harvester I-V table.
///
/// Rows and columns are numbered from 1 over the data cells (the header and
/// voltage column excluded) in invariant errors.
pub fn parse_iv_surface(text: &str, name: &str) -> Result<HarvesterIvSurface> {
    let rows = rows(text, name)?;
    let Some((hline, header)) = rows.first() else {
        return Err(schema(name, "file is empty"));
    };
    if header.len() < 3 || !header[0].is_empty() {
        return Err(schema(
            name,
            "header must be a blank cell followed by at least two dBm values",
        ));
    }
    let dbm = header[1..]
        .iter()
        .map(|c| number(c, name, *hline))
        .collect::<Result<Vec<_>>>()?;
    if dbm.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(schema(name, "receive-power header must be strictly ascending"));
    }
    let mut volts = Vec::new();
    let mut grid = Vec::new();
    for (line, cells) in &rows[1..] {
        if cells.len() != dbm.len() + 1 {
            return Err(schema(
                name,
                format!(
                    "line {line}: expected {} columns, found {}",
                    dbm.len() + 1,
                    cells.len()
                ),
            ));
        }
        volts.push(number(&cells[0], name, *line)?);
        grid.push(
            cells[1..]
                .iter()
                .map(|c| number(c, name, *line))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if volts.len() < 2 {
        return Err(schema(name, "need at least two voltage rows"));
    }
    if volts[0] < 0.0 || volts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(schema(
            name,
            "voltage rows must be non-negative and strictly ascending",
        ));
    }
    for (i, row) in grid.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if !(c >= 0.0) {
                return Err(Error::Invariant {
                    path: name.to_string(),
                    row: i + 1,
                    column: j + 1,
                    message: format!("negative current {c} mA"),
                });
            }
        }
    }
    for j in 0..dbm.len() {
        let col_max = grid.iter().map(|r| r[j]).fold(0.0, f64::max);
        let slack = IV_MONOTONE_TOLERANCE * col_max;
        for i in 1..grid.len() {
            if grid[i][j] > grid[i - 1][j] + slack {
                return Err(Error::Invariant {
                    path: name.to_string(),
                    row: i + 1,
                    column: j + 1,
                    message: format!(
                        "current rises with voltage ({} mA at {} V after {} mA at {} V)",
                        grid[i][j],
                        volts[i],
                        grid[i - 1][j],
                        volts[i - 1]
                    ),
                });
            }
        }
    }
    for (i, row) in grid.iter().enumerate() {
        let row_max = row.iter().copied().fold(0.0, f64::max);
        let slack = IV_MONOTONE_TOLERANCE * row_max;
        for j in 1..row.len() {
            if row[j] + slack < row[j - 1] {
                return Err(Error::Invariant {
                    path: name.to_string(),
                    row: i + 1,
                    column: j + 1,
                    message: format!(
                        "current falls with receive power ({} mA at {} dBm after {} mA)",
                        row[j],
                        dbm[j],
                        row[j - 1]
                    ),
                });
            }
        }
    }
    let amps = grid
        .into_iter()
        .map(|r| r.into_iter().map(|ma| ma * 1e-3).collect())
        .collect();
    HarvesterIvSurface::from_dbm_axis(volts, dbm, amps)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_iv_surface(path: &Path) -> Result<HarvesterIvSurface> {
    parse_iv_surface(&read(path)?, &path.display().to_string())
}

pub fn load_pae_curve(path: &Path) -> Result<PaeCurve> {
    parse_pae_curve(&read(path)?, &path.display().to_string())
}

pub fn load_path_loss_trace(path: &Path) -> Result<Vec<(f64, f64)>> {
    parse_path_loss_trace(&read(path)?, &path.display().to_string())
}

pub fn load_leakage_trace(path: &Path) -> Result<Vec<(f64, f64)>> {
    parse_leakage_trace(&read(path)?, &path.display().to_string())
}

pub fn load_load_traces(path: &Path) -> Result<LoadTraces> {
    parse_load_traces(&read(path)?, &path.display().to_string())
}
