//! Physical component models: amplifier, RF channel, wireless energy
//! harvester, supercapacitor and the sensor-module loads.
//!
//! Measured curves (amplifier PAE, harvester I-V) are held as lookup tables.
//! The PAE curve is interpolated piecewise-linearly in output power; the I-V
//! surface bilinearly in (voltage, receive power in dBm). All types are
//! immutable after construction.

use std::fmt;

use crate::energy_evolution::FrameTiming;
use crate::error::{Error, Result};
use crate::units::{dbm_to_watts, watts_to_dbm};

/// Relative slack on the harvester cut-off voltage so that a node sitting
/// exactly at `V_max` (up to rounding of `sqrt(2E/C)`) still harvests.
const CUTOFF_SLACK: f64 = 1e-9;

/// Amplifier power-added efficiency as a function of output power.
#[derive(Debug, Clone, PartialEq)]
pub struct PaeCurve {
    points: Vec<(f64, f64)>,
}

impl PaeCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("PAE curve needs at least two points"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::param(format!(
                    "PAE curve output power must be strictly increasing ({} W then {} W)",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(p, e)) = points
            .iter()
            .find(|(p, e)| !(p.is_finite() && *e > 0.0 && *e <= 1.0))
        {
            return Err(Error::param(format!(
                "PAE must lie in (0, 1] at every point (got {e} at {p} W)"
            )));
        }
        Ok(PaeCurve { points })
    }

    /// Flat efficiency over `[lo, hi]`.
    pub fn constant(pae: f64, lo: f64, hi: f64) -> Result<Self> {
        PaeCurve::new(vec![(lo, pae), (hi, pae)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// θ(p): linear interpolation, clamped to the end values outside the table.
    pub fn eval(&self, p: f64) -> f64 {
        interp_clamped(&self.points, p)
    }

    /// Same curve with every efficiency multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PaeCurve::new(self.points.iter().map(|&(p, e)| (p, e * factor)).collect())
    }
}

fn interp_clamped(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let idx = points.partition_point(|&(px, _)| px <= x);
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierModel {
    /// RF source power feeding the amplifier, watts.
    pub src_power: f64,
    /// Maximum output power Υ_max, watts.
    pub max_output: f64,
    pub pae: PaeCurve,
}

impl AmplifierModel {
    pub fn new(src_power: f64, max_output: f64, pae: PaeCurve) -> Result<Self> {
        if !(src_power > 0.0 && src_power < max_output) {
            return Err(Error::param(format!(
                "amplifier needs 0 < source power < max output (got {src_power} W, {max_output} W)"
            )));
        }
        Ok(AmplifierModel {
            src_power,
            max_output,
            pae,
        })
    }
}

/// DC power drawn by the amplifier for RF output `p_tx`.
pub fn amp_consumption(amp: &AmplifierModel, p_tx: f64, on: bool) -> Result<f64> {
    if !on {
        return Ok(0.0);
    }
    if p_tx > amp.max_output {
        return Err(Error::domain(format!(
            "transmit power {p_tx} W exceeds maximum output power {} W",
            amp.max_output
        )));
    }
    if !(p_tx >= 0.0) {
        return Err(Error::domain(format!("transmit power must be >= 0, got {p_tx}")));
    }
    Ok(p_tx / amp.pae.eval(p_tx))
}

/// Power attenuation of the energy-transfer channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// `h = g_ref / d^exponent`.
    PathLoss { g_ref: f64, exponent: f64 },
    FixedAttenuation { h: f64 },
    /// Piecewise-constant attenuation, `(start_time_s, h)` steps.
    Schedule { steps: Vec<(f64, f64)> },
}

impl ChannelModel {
    pub fn path_loss(g_ref: f64, exponent: f64) -> Result<Self> {
        if !(g_ref > 0.0 && g_ref <= 1.0) || !(exponent > 0.0) {
            return Err(Error::param(format!(
                "path loss needs G in (0, 1] and exponent > 0 (got {g_ref}, {exponent})"
            )));
        }
        Ok(ChannelModel::PathLoss { g_ref, exponent })
    }

    pub fn fixed(h: f64) -> Result<Self> {
        check_ratio(h)?;
        Ok(ChannelModel::FixedAttenuation { h })
    }

    pub fn schedule(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::param("attenuation schedule is empty"));
        }
        for w in steps.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::param("schedule start times must be strictly increasing"));
            }
        }
        for &(_, h) in &steps {
            check_ratio(h)?;
        }
        Ok(ChannelModel::Schedule { steps })
    }
}

fn check_ratio(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("attenuation ratio must lie in (0, 1], got {h}")))
    }
}

pub fn channel_attenuation(ch: &ChannelModel, d: f64, t: f64) -> Result<f64> {
    match ch {
        ChannelModel::PathLoss { g_ref, exponent } => {
            if !(d > 0.0) {
                return Err(Error::domain(format!("distance must be > 0, got {d} m")));
            }
            Ok((g_ref / d.powf(*exponent)).min(1.0))
        }
        ChannelModel::FixedAttenuation { h } => Ok(*h),
        ChannelModel::Schedule { steps } => {
            let idx = steps.partition_point(|&(start, _)| start <= t);
            if idx == 0 {
                return Err(Error::domain(format!(
                    "time {t} s precedes the first schedule step at {} s",
                    steps[0].0
                )));
            }
            Ok(steps[idx - 1].1)
        }
    }
}

/// `p_rx = h * p_tx`.
pub fn receive_power(p_tx: f64, h: f64) -> f64 {
    h * p_tx
}

/// Measured harvester current ρ(V, p_rx) on a (voltage × receive-power) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvesterIvSurface {
    v_axis: Vec<f64>,
    p_axis: Vec<f64>,
    p_axis_dbm: Vec<f64>,
    current: Vec<Vec<f64>>,
    cutoff: Option<f64>,
}

impl HarvesterIvSurface {
    /// `current[i][j]` is the current in amps at `v_axis[i]` volts and
    /// `p_axis[j]` watts.
    pub fn new(v_axis: Vec<f64>, p_axis: Vec<f64>, current: Vec<Vec<f64>>) -> Result<Self> {
        let p_axis_dbm = p_axis.iter().map(|&p| watts_to_dbm(p)).collect();
        Self::with_dbm_axis(v_axis, p_axis, p_axis_dbm, current)
    }

    /// Builds the surface from a receive-power axis given in dBm.
    pub fn from_dbm_axis(v_axis: Vec<f64>, dbm: Vec<f64>, current: Vec<Vec<f64>>) -> Result<Self> {
        let p_axis = dbm.iter().map(|&d| dbm_to_watts(d)).collect();
        Self::with_dbm_axis(v_axis, p_axis, dbm, current)
    }

    fn with_dbm_axis(
        v_axis: Vec<f64>,
        p_axis: Vec<f64>,
        p_axis_dbm: Vec<f64>,
        current: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if v_axis.len() < 2 || p_axis.len() < 2 {
            return Err(Error::param("I-V surface axes need at least two entries each"));
        }
        if !strictly_increasing(&v_axis) || v_axis[0] < 0.0 {
            return Err(Error::param("voltage axis must be non-negative and strictly increasing"));
        }
        if !strictly_increasing(&p_axis) || !(p_axis[0] > 0.0) {
            return Err(Error::param("receive-power axis must be positive and strictly increasing"));
        }
        if current.len() != v_axis.len() || current.iter().any(|r| r.len() != p_axis.len()) {
            return Err(Error::param(format!(
                "current grid must be {}x{}",
                v_axis.len(),
                p_axis.len()
            )));
        }
        for (i, row) in current.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::param(format!(
                        "current at row {i}, column {j} must be finite and >= 0 (got {c})"
                    )));
                }
            }
        }
        Ok(HarvesterIvSurface {
            v_axis,
            p_axis,
            p_axis_dbm,
            current,
            cutoff: None,
        })
    }

    /// Attaches the node's maximum voltage; above it the harvester delivers
    /// no current.
    pub fn with_cutoff(mut self, v_max: f64) -> Self {
        self.cutoff = Some(v_max);
        self
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn v_axis(&self) -> &[f64] {
        &self.v_axis
    }

    /// Receive-power axis in watts.
    pub fn p_axis(&self) -> &[f64] {
        &self.p_axis
    }

    pub fn p_axis_dbm(&self) -> &[f64] {
        &self.p_axis_dbm
    }

    pub fn grid(&self) -> &[Vec<f64>] {
        &self.current
    }

    /// ρ(v, p_rx) in amps.
    pub fn current(&self, v: f64, p_rx: f64) -> f64 {
        if !(p_rx > 0.0) {
            return 0.0;
        }
        if let Some(v_max) = self.cutoff {
            if v > v_max * (1.0 + CUTOFF_SLACK) {
                return 0.0;
            }
        }
        let (i, tv) = bracket(&self.v_axis, v);
        let p_min = self.p_axis[0];
        if p_rx < p_min {
            // below the table the lowest column scales linearly to zero
            let col = lerp(self.current[i][0], self.current[i + 1][0], tv);
            return col * p_rx / p_min;
        }
        let (j, tp) = {
            let n = self.p_axis.len();
            if p_rx >= self.p_axis[n - 1] {
                (n - 2, 1.0)
            } else {
                let j = self.p_axis.partition_point(|&p| p <= p_rx) - 1;
                let tp = if p_rx == self.p_axis[j] {
                    0.0
                } else {
                    let d = watts_to_dbm(p_rx);
                    ((d - self.p_axis_dbm[j]) / (self.p_axis_dbm[j + 1] - self.p_axis_dbm[j]))
                        .clamp(0.0, 1.0)
                };
                (j, tp)
            }
        };
        let c = &self.current;
        let lo = lerp(c[i][j], c[i][j + 1], tp);
        let hi = lerp(c[i + 1][j], c[i + 1][j + 1], tp);
        lerp(lo, hi, tv)
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[1] > w[0])
}

/// Index of the lower knot and the fractional position, clamped to the axis.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a + (b - a) * t
    }
}

pub fn harvester_current(surf: &HarvesterIvSurface, v: f64, p_rx: f64) -> f64 {
    surf.current(v, p_rx)
}

/// η_V(v, p_rx) = ρ(v, p_rx)·v / p_rx.
pub fn harvesting_efficiency(surf: &HarvesterIvSurface, v: f64, p_rx: f64) -> Result<f64> {
    if !(p_rx > 0.0) {
        return Err(Error::domain(format!(
            "harvesting efficiency undefined for receive power {p_rx} W"
        )));
    }
    Ok(surf.current(v, p_rx) * v / p_rx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupercapModel {
    /// Farads.
    pub capacitance: f64,
    /// Ohms; `f64::INFINITY` for an ideal capacitor.
    pub leak_resistance: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl SupercapModel {
    pub fn new(capacitance: f64, leak_resistance: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(capacitance > 0.0 && capacitance.is_finite()) {
            return Err(Error::param(format!("capacitance must be > 0, got {capacitance}")));
        }
        if !(leak_resistance > 0.0) {
            return Err(Error::param(format!(
                "leakage resistance must be > 0, got {leak_resistance}"
            )));
        }
        if !(v_min >= 0.0 && v_min < v_max && v_max.is_finite()) {
            return Err(Error::param(format!(
                "need 0 <= V_min < V_max (got {v_min} V, {v_max} V)"
            )));
        }
        Ok(SupercapModel {
            capacitance,
            leak_resistance,
            v_min,
            v_max,
        })
    }

    /// V = sqrt(2E/C); negative energies read as empty.
    pub fn voltage(&self, energy: f64) -> f64 {
        (2.0 * energy.max(0.0) / self.capacitance).sqrt()
    }

    /// E = C V² / 2.
    pub fn energy(&self, voltage: f64) -> f64 {
        0.5 * self.capacitance * voltage * voltage
    }

    pub fn e_min(&self) -> f64 {
        self.energy(self.v_min)
    }

    pub fn e_max(&self) -> f64 {
        self.energy(self.v_max)
    }
}

/// Stored energy to node voltage.
pub fn energy_to_voltage(cap: &SupercapModel, e: f64) -> f64 {
    cap.voltage(e)
}

/// Node voltage to stored energy.
pub fn voltage_to_energy(cap: &SupercapModel, v: f64) -> f64 {
    cap.energy(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorMode {
    Idle,
    Active,
    Receive,
    Transmit,
}

impl SensorMode {
    pub const ALL: [SensorMode; 4] = [
        SensorMode::Idle,
        SensorMode::Active,
        SensorMode::Receive,
        SensorMode::Transmit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensorMode::Idle => "idle",
            SensorMode::Active => "active",
            SensorMode::Receive => "rx",
            SensorMode::Transmit => "tx",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SensorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constant-resistance plus constant-current load of one sensor mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeLoad {
    /// γ(m) in ohms, possibly infinite.
    pub resistance: f64,
    /// ζ(m) in amps.
    pub current: f64,
}

impl ModeLoad {
    pub fn new(resistance: f64, current: f64) -> Self {
        ModeLoad {
            resistance,
            current,
        }
    }
}

/// Awake-frame segment lengths, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDurations {
    pub rx: f64,
    pub act: f64,
    pub tx: f64,
}

impl ModeDurations {
    pub fn total(&self) -> f64 {
        self.rx + self.act + self.tx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadTable {
    loads: [ModeLoad; 4],
    pub durations: ModeDurations,
}

impl LoadTable {
    pub fn new(
        idle: ModeLoad,
        active: ModeLoad,
        receive: ModeLoad,
        transmit: ModeLoad,
        durations: ModeDurations,
    ) -> Result<Self> {
        let loads = [idle, active, receive, transmit];
        for (m, l) in SensorMode::ALL.iter().zip(&loads) {
            if !(l.resistance > 0.0) {
                return Err(Error::param(format!(
                    "{m} load resistance must be > 0 or infinite, got {}",
                    l.resistance
                )));
            }
            if !(l.current >= 0.0 && l.current.is_finite()) {
                return Err(Error::param(format!(
                    "{m} load current must be >= 0, got {}",
                    l.current
                )));
            }
        }
        let d = durations;
        if !(d.rx > 0.0 && d.act > 0.0 && d.tx > 0.0) {
            return Err(Error::param("mode durations must be > 0"));
        }
        Ok(LoadTable { loads, durations })
    }

    pub fn load(&self, m: SensorMode) -> ModeLoad {
        self.loads[m.index()]
    }

    /// Sensor-module power V·I_sen in mode `m`.
    pub fn power(&self, v: f64, m: SensorMode) -> f64 {
        v * sensor_current(self, v, m)
    }
}

/// I_sen = V/γ(m) + ζ(m).
pub fn sensor_current(loads: &LoadTable, v: f64, m: SensorMode) -> f64 {
    let l = loads.load(m);
    let resistive = if l.resistance.is_infinite() {
        0.0
    } else {
        v / l.resistance
    };
    resistive + l.current
}

/// Complete physical model of the beacon-to-node power path.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub amplifier: AmplifierModel,
    /// Carries the supercapacitor's `V_max` as its cut-off voltage.
    pub harvester: HarvesterIvSurface,
    pub supercap: SupercapModel,
    pub loads: LoadTable,
    pub timing: FrameTiming,
}

impl DeviceParams {
    /// Assembles the model; the harvester cut-off is set to `supercap.v_max`
    /// and the frame length is checked against the awake-mode durations.
    pub fn new(
        amplifier: AmplifierModel,
        harvester: HarvesterIvSurface,
        supercap: SupercapModel,
        loads: LoadTable,
        frame_len: f64,
    ) -> Result<Self> {
        let timing = FrameTiming::new(frame_len, loads.durations)?;
        let harvester = harvester.with_cutoff(supercap.v_max);
        Ok(DeviceParams {
            amplifier,
            harvester,
            supercap,
            loads,
            timing,
        })
    }

    pub fn e_min(&self) -> f64 {
        self.supercap.e_min()
    }

    pub fn e_max(&self) -> f64 {
        self.supercap.e_max()
    }

    /// η_E(E, p_rx): harvesting efficiency at the voltage of stored energy `e`.
    pub fn efficiency_at_energy(&self, e: f64, p_rx: f64) -> f64 {
        if !(p_rx > 0.0) {
            return 0.0;
        }
        let v = self.supercap.voltage(e);
        self.harvester.current(v, p_rx) * v / p_rx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn flat_pae(eff: f64) -> PaeCurve {
        PaeCurve::constant(eff, 0.001, 10.0).unwrap()
    }

    #[test]
    fn amplifier_off_draws_nothing() {
        let amp = AmplifierModel::new(0.004, 2.3, flat_pae(0.5)).unwrap();
        assert_eq!(amp_consumption(&amp, 1.7, false).unwrap(), 0.0);
        assert_eq!(amp_consumption(&amp, 99.0, false).unwrap(), 0.0);
    }

    #[test]
    fn constant_pae_doubles_power() {
        let amp = AmplifierModel::new(0.004, 2.3, flat_pae(0.5)).unwrap();
        assert_eq!(amp_consumption(&amp, 1.0, true).unwrap(), 2.0);
    }

    #[test]
    fn amplifier_consumption_on_reference_curve() {
        // Hand interpolation on the fixture: 2300 mW is the last knot, PAE 0.45.
        // 1200 mW lies 2/5 of the way from (1000, 0.36) to (1500, 0.41) -> 0.38.
        let amp = reference::amplifier();
        let at_max = amp_consumption(&amp, 2.3, true).unwrap();
        assert!((at_max - 2.3 / 0.45).abs() < 1e-12);
        let mid = amp_consumption(&amp, 1.2, true).unwrap();
        assert!((mid - 1.2 / 0.38).abs() < 1e-12);
    }

    #[test]
    fn amplifier_rejects_excess_power() {
        let amp = reference::amplifier();
        let err = amp_consumption(&amp, 2.31, true).unwrap_err();
        assert!(err.to_string().contains("exceeds maximum output power"));
    }

    #[test]
    fn pae_clamps_outside_table() {
        let curve = reference::pae_curve();
        assert_eq!(curve.eval(0.0), curve.points()[0].1);
        assert_eq!(curve.eval(100.0), curve.points().last().unwrap().1);
    }

    #[test]
    fn pae_curve_validation() {
        assert!(PaeCurve::new(vec![(1.0, 0.5)]).is_err());
        assert!(PaeCurve::new(vec![(1.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(PaeCurve::new(vec![(1.0, 0.0), (2.0, 0.6)]).is_err());
        assert!(PaeCurve::new(vec![(1.0, 0.5), (2.0, 1.2)]).is_err());
    }

    #[test]
    fn path_loss_at_one_meter() {
        let ch = ChannelModel::path_loss(0.01, 3.31).unwrap();
        assert!((channel_attenuation(&ch, 1.0, 0.0).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn path_loss_at_two_meters_matches_log_domain() {
        let ch = ChannelModel::path_loss(0.01, 3.31).unwrap();
        let h = channel_attenuation(&ch, 2.0, 0.0).unwrap();
        let log_domain = (0.01f64.ln() - 3.31 * 2f64.ln()).exp();
        assert!((h - 0.01 / 2f64.powf(3.31)).abs() < 1e-15);
        assert!((h - log_domain).abs() / h < 1e-12);
    }

    #[test]
    fn path_loss_rejects_non_positive_distance() {
        let ch = ChannelModel::path_loss(0.01, 3.31).unwrap();
        assert!(channel_attenuation(&ch, 0.0, 0.0).is_err());
    }

    #[test]
    fn fixed_channel_ignores_distance() {
        let ch = ChannelModel::fixed(1.0).unwrap();
        assert_eq!(channel_attenuation(&ch, 123.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn schedule_picks_latest_step() {
        let ch = ChannelModel::schedule(vec![(0.0, 0.5), (10.0, 0.1), (20.0, 0.2)]).unwrap();
        assert_eq!(channel_attenuation(&ch, 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(channel_attenuation(&ch, 1.0, 9.999).unwrap(), 0.5);
        assert_eq!(channel_attenuation(&ch, 1.0, 10.0).unwrap(), 0.1);
        assert_eq!(channel_attenuation(&ch, 1.0, 25.0).unwrap(), 0.2);
        let late = ChannelModel::schedule(vec![(5.0, 0.5)]).unwrap();
        assert!(matches!(channel_attenuation(&late, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn schedule_validation() {
        assert!(ChannelModel::schedule(vec![]).is_err());
        assert!(ChannelModel::schedule(vec![(0.0, 0.5), (0.0, 0.4)]).is_err());
        assert!(ChannelModel::schedule(vec![(0.0, 1.5)]).is_err());
        assert!(ChannelModel::fixed(0.0).is_err());
    }

    #[test]
    fn receive_power_examples() {
        assert_eq!(receive_power(2.3, 1.0), 2.3);
        assert!((receive_power(2.3, 0.01) - 0.023).abs() < 1e-15);
        assert_eq!(receive_power(0.0, 0.3), 0.0);
    }

    #[test]
    fn harvester_zero_input_gives_zero_current() {
        let s = reference::harvester_surface();
        for v in [0.0, 1.0, 2.7, 3.5] {
            assert_eq!(harvester_current(&s, v, 0.0), 0.0);
        }
    }

    #[test]
    fn harvester_knots_are_exact() {
        let s = reference::harvester_surface();
        for (i, &v) in s.v_axis().iter().enumerate() {
            for (j, &p) in s.p_axis().iter().enumerate() {
                assert_eq!(harvester_current(&s, v, p), s.grid()[i][j], "knot ({i},{j})");
            }
        }
    }

    #[test]
    fn harvester_voltage_midpoint_is_mean() {
        let s = reference::harvester_surface();
        let j = 4;
        let p = s.p_axis()[j];
        for i in 0..s.v_axis().len() - 1 {
            let v = 0.5 * (s.v_axis()[i] + s.v_axis()[i + 1]);
            let expect = 0.5 * (s.grid()[i][j] + s.grid()[i + 1][j]);
            assert!((harvester_current(&s, v, p) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn harvester_interpolates_in_db_between_columns() {
        let s = reference::harvester_surface();
        let (d0, d1) = (s.p_axis_dbm()[2], s.p_axis_dbm()[3]);
        let p = dbm_to_watts(0.25 * d0 + 0.75 * d1);
        let expect = 0.25 * s.grid()[5][2] + 0.75 * s.grid()[5][3];
        assert!((harvester_current(&s, s.v_axis()[5], p) - expect).abs() < 1e-12);
    }

    #[test]
    fn harvester_below_table_scales_to_zero() {
        let s = reference::harvester_surface();
        let p_min = s.p_axis()[0];
        let v = s.v_axis()[3];
        let half = harvester_current(&s, v, 0.5 * p_min);
        assert!((half - 0.5 * s.grid()[3][0]).abs() < 1e-15);
    }

    #[test]
    fn harvester_clamps_above_table() {
        let s = reference::harvester_surface();
        let last = s.p_axis().len() - 1;
        assert_eq!(harvester_current(&s, s.v_axis()[2], 10.0), s.grid()[2][last]);
    }

    #[test]
    fn harvester_cuts_off_above_v_max() {
        let s = reference::harvester_surface().with_cutoff(3.0);
        assert!(harvester_current(&s, 3.0, 0.02) > 0.0);
        assert_eq!(harvester_current(&s, 3.01, 0.02), 0.0);
    }

    #[test]
    fn efficiency_examples() {
        let s = reference::harvester_surface();
        // no current at 4 V on the fixture -> zero efficiency
        assert_eq!(harvesting_efficiency(&s, 4.0, 0.01).unwrap(), 0.0);
        let (i, j) = (11, 5);
        let (v, p) = (s.v_axis()[i], s.p_axis()[j]);
        let expect = v * s.grid()[i][j] / p;
        assert!((harvesting_efficiency(&s, v, p).unwrap() - expect).abs() < 1e-15);
        assert!(harvesting_efficiency(&s, 2.0, 0.0).is_err());
    }

    #[test]
    fn efficiency_peaks_near_ten_dbm() {
        let s = reference::harvester_surface();
        let v = 2.75;
        // unimodal over the measured columns
        let knots: Vec<f64> = s
            .p_axis()
            .iter()
            .map(|&p| harvesting_efficiency(&s, v, p).unwrap())
            .collect();
        let top = knots
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(top > 0 && top < knots.len() - 1);
        assert!(knots[..=top].windows(2).all(|w| w[1] > w[0]));
        assert!(knots[top..].windows(2).all(|w| w[1] < w[0]));
        // between knots the dB-linear current bulges the efficiency slightly
        let lo = s.p_axis_dbm()[0];
        let hi = *s.p_axis_dbm().last().unwrap();
        let n = 400;
        let (peak_dbm, peak) = (0..=n)
            .map(|k| {
                let d = lo + (hi - lo) * k as f64 / n as f64;
                (d, harvesting_efficiency(&s, v, dbm_to_watts(d)).unwrap())
            })
            .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!((peak_dbm - 10.0).abs() < 1.0, "peak at {peak_dbm} dBm");
        assert!(peak < knots[top] * 1.03);
    }

    #[test]
    fn sensor_current_examples() {
        let loads = reference::load_table();
        let idle = sensor_current(&loads, 3.0, SensorMode::Idle);
        assert!((idle - 0.035e-3).abs() < 1e-18);
        let active = sensor_current(&loads, 3.0, SensorMode::Active);
        assert!((active - (3.0 / 626.0 + 3.5e-5)).abs() < 1e-15);
        assert!((active - 4.827e-3).abs() < 1e-6);
        for m in SensorMode::ALL {
            assert_eq!(sensor_current(&loads, 0.0, m), loads.load(m).current);
        }
    }

    #[test]
    fn energy_voltage_examples() {
        let cap = SupercapModel::new(0.1, 196e3, 1.8, 3.0).unwrap();
        assert!((voltage_to_energy(&cap, 3.0) - 0.45).abs() < 1e-15);
        assert_eq!(energy_to_voltage(&cap, 0.0), 0.0);
        assert!((energy_to_voltage(&cap, 0.38) - 2.756809750418044).abs() < 1e-12);
    }

    #[test]
    fn supercap_validation() {
        assert!(SupercapModel::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(SupercapModel::new(0.1, 0.0, 0.0, 1.0).is_err());
        assert!(SupercapModel::new(0.1, 1.0, 2.0, 1.0).is_err());
        assert!(SupercapModel::new(0.1, f64::INFINITY, 0.0, 1.0).is_ok());
    }

    #[test]
    fn load_table_validation() {
        let ok = ModeLoad::new(626.0, 1e-3);
        let d = ModeDurations {
            rx: 1e-3,
            act: 1e-3,
            tx: 1e-3,
        };
        assert!(LoadTable::new(ModeLoad::new(0.0, 0.0), ok, ok, ok, d).is_err());
        assert!(LoadTable::new(ModeLoad::new(f64::INFINITY, -1.0), ok, ok, ok, d).is_err());
        let zero = ModeDurations { rx: 0.0, ..d };
        assert!(LoadTable::new(ok, ok, ok, ok, zero).is_err());
    }
}
