//! Stored-energy dynamics of the node: the continuous-time ODE
//! `dE/dt = φ(E, p_rx) − ξ_m(E) − ξ_leak(E)`, its fixed-step integration over
//! one frame, and the frozen-energy frame and epoch maps used by the
//! controller.

use crate::device_models::{AmplifierModel, DeviceParams, ModeDurations, SensorMode};
use crate::energy_management::ControlTuple;
use crate::error::{Error, Result};

/// Frame layout: an awake frame runs rx → active → tx and idles for the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub frame_len: f64,
    pub rx: f64,
    pub act: f64,
    pub tx: f64,
}

impl FrameTiming {
    pub fn new(frame_len: f64, durations: ModeDurations) -> Result<Self> {
        let timing = FrameTiming {
            frame_len,
            rx: durations.rx,
            act: durations.act,
            tx: durations.tx,
        };
        if !(timing.idle() > 0.0) || !frame_len.is_finite() {
            return Err(Error::param(format!(
                "frame length {frame_len} s leaves no idle time after {} s of rx/act/tx",
                durations.total()
            )));
        }
        Ok(timing)
    }

    pub fn idle(&self) -> f64 {
        self.frame_len - self.rx - self.act - self.tx
    }

    /// Time spent in `m` during an awake frame.
    pub fn duration(&self, m: SensorMode) -> f64 {
        match m {
            SensorMode::Receive => self.rx,
            SensorMode::Active => self.act,
            SensorMode::Transmit => self.tx,
            SensorMode::Idle => self.idle(),
        }
    }

    /// Mode in force at time `t` into an awake frame.
    pub fn awake_mode_at(&self, t: f64) -> SensorMode {
        if t < self.rx {
            SensorMode::Receive
        } else if t < self.rx + self.act {
            SensorMode::Active
        } else if t < self.rx + self.act + self.tx {
            SensorMode::Transmit
        } else {
            SensorMode::Idle
        }
    }
}

/// Stored energy of the supercapacitor, kept within `[0, E_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    energy: f64,
}

impl EnergyState {
    pub fn new(energy: f64, params: &DeviceParams) -> Self {
        EnergyState {
            energy: energy.clamp(0.0, params.e_max()),
        }
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn voltage(&self, params: &DeviceParams) -> f64 {
        params.supercap.voltage(self.energy)
    }

    /// Below `E_min` the sensor module cannot run.
    pub fn is_brownout(&self, params: &DeviceParams) -> bool {
        self.energy < params.e_min()
    }
}

/// φ(E, p_rx): power delivered by the harvester.
pub fn harvested_power(params: &DeviceParams, e: f64, p_rx: f64) -> f64 {
    params.efficiency_at_energy(e, p_rx) * p_rx
}

/// ξ_m(E) = 2E/(Cγ(m)) + sqrt(2ζ(m)²/C)·sqrt(E).
pub fn mode_power(params: &DeviceParams, e: f64, m: SensorMode) -> f64 {
    let c = params.supercap.capacitance;
    let load = params.loads.load(m);
    let e = e.max(0.0);
    let resistive = if load.resistance.is_infinite() {
        0.0
    } else {
        2.0 * e / (c * load.resistance)
    };
    resistive + (2.0 * load.current * load.current / c).sqrt() * e.sqrt()
}

/// ξ_leak(E) = 2E/(C·R_leak).
pub fn leakage_power(params: &DeviceParams, e: f64) -> f64 {
    let r = params.supercap.leak_resistance;
    if r.is_infinite() {
        0.0
    } else {
        2.0 * e.max(0.0) / (params.supercap.capacitance * r)
    }
}

pub fn energy_derivative(params: &DeviceParams, e: f64, p_rx: f64, m: SensorMode) -> f64 {
    harvested_power(params, e, p_rx) - mode_power(params, e, m) - leakage_power(params, e)
}

/// Energy flows accumulated over one integrated frame, joules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLedger {
    /// Stored energy at the end of the frame, clamped to `[0, E_max]`.
    pub energy: f64,
    pub harvested: f64,
    pub sensor: f64,
    pub leakage: f64,
}

/// Integrates the stored-energy ODE across one frame with classic RK4.
///
/// The amplifier is on for the first `alpha·T_frame` seconds. The frame is
/// cut at every mode and amplifier boundary; each piece is stepped evenly
/// with the largest step not exceeding `dt`, so the right-hand side is smooth
/// inside every step.
pub fn integrate_frame(
    params: &DeviceParams,
    e0: f64,
    alpha: f64,
    upsilon: f64,
    h: f64,
    awake: bool,
    dt: f64,
) -> f64 {
    integrate_frame_ledger(params, e0, alpha, upsilon, h, awake, dt).energy
}

pub fn integrate_frame_ledger(
    params: &DeviceParams,
    e0: f64,
    alpha: f64,
    upsilon: f64,
    h: f64,
    awake: bool,
    dt: f64,
) -> FrameLedger {
    assert!(dt > 0.0, "integration step must be positive");
    let timing = &params.timing;
    let t_frame = timing.frame_len;
    let on_until = alpha.clamp(0.0, 1.0) * t_frame;
    let p_on = h * upsilon;

    let mut cuts = vec![0.0, on_until, t_frame];
    if awake {
        cuts.extend([
            timing.rx,
            timing.rx + timing.act,
            timing.rx + timing.act + timing.tx,
        ]);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut y = [e0, 0.0, 0.0, 0.0];
    for w in cuts.windows(2) {
        let (start, end) = (w[0], w[1]);
        let len = end - start;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (start + end);
        let mode = if awake {
            timing.awake_mode_at(mid)
        } else {
            SensorMode::Idle
        };
        let p_rx = if mid < on_until { p_on } else { 0.0 };
        let rhs = |e: f64| {
            let phi = harvested_power(params, e, p_rx);
            let xi = mode_power(params, e, mode);
            let leak = leakage_power(params, e);
            [phi - xi - leak, phi, xi, leak]
        };
        let steps = (len / dt - 1e-9).ceil().max(1.0) as usize;
        let step = len / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(y[0]);
            let k2 = rhs(y[0] + 0.5 * step * k1[0]);
            let k3 = rhs(y[0] + 0.5 * step * k2[0]);
            let k4 = rhs(y[0] + step * k3[0]);
            for n in 0..4 {
                y[n] += step / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
            }
            y[0] = y[0].max(0.0);
        }
    }
    FrameLedger {
        energy: y[0].clamp(0.0, params.e_max()),
        harvested: y[1],
        sensor: y[2],
        leakage: y[3],
    }
}

/// Φ(E, α, Υ, h) = α·η_E(E, hΥ)·hΥ·T_frame.
pub fn harvested_energy(params: &DeviceParams, e: f64, alpha: f64, upsilon: f64, h: f64) -> f64 {
    alpha * harvested_power(params, e, h * upsilon) * params.timing.frame_len
}

/// φ(E) = (ξ_idle(E) + ξ_leak(E))·T_frame: consumption of a sleeping frame.
pub fn sleep_energy(params: &DeviceParams, e: f64) -> f64 {
    (mode_power(params, e, SensorMode::Idle) + leakage_power(params, e)) * params.timing.frame_len
}

/// δ(E): extra energy an awake frame costs over a sleeping one.
pub fn wake_energy(params: &DeviceParams, e: f64) -> f64 {
    let idle = mode_power(params, e, SensorMode::Idle);
    [SensorMode::Receive, SensorMode::Active, SensorMode::Transmit]
        .into_iter()
        .map(|m| (mode_power(params, e, m) - idle) * params.timing.duration(m))
        .sum()
}

/// Θ(E, a) = φ(E) + δ(E)·a.
pub fn consumed_energy(params: &DeviceParams, e: f64, awake: bool) -> f64 {
    sleep_energy(params, e) + if awake { wake_energy(params, e) } else { 0.0 }
}

/// Sensor-module share of Θ (leakage excluded).
pub fn sensor_energy(params: &DeviceParams, e: f64, awake: bool) -> f64 {
    if awake {
        SensorMode::ALL
            .into_iter()
            .map(|m| mode_power(params, e, m) * params.timing.duration(m))
            .sum()
    } else {
        mode_power(params, e, SensorMode::Idle) * params.timing.frame_len
    }
}

/// E(k+1) = min{E + Φ − Θ, E_max}, floored at zero.
pub fn discrete_step(
    params: &DeviceParams,
    e: f64,
    alpha: f64,
    upsilon: f64,
    h: f64,
    awake: bool,
) -> f64 {
    let next = e + harvested_energy(params, e, alpha, upsilon, h) - consumed_energy(params, e, awake);
    next.min(params.e_max()).max(0.0)
}

/// Ω(α, Υ) = α·Υ/θ(Υ).
pub fn avg_amplifier_power(amp: &AmplifierModel, alpha: f64, upsilon: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    alpha * upsilon / amp.pae.eval(upsilon)
}

/// Q(E, r) = φ(E) + δ(E)·r, the per-frame consumption at awake ratio `r`.
pub fn avg_consumed_energy(params: &DeviceParams, e: f64, r: f64) -> f64 {
    debug_assert!(r > 0.0 && r <= 1.0, "awake ratio must lie in (0, 1]");
    sleep_energy(params, e) + wake_energy(params, e) * r
}

/// E_{i+1} = min{E_i + (Φ − Q(E_i, 1/τ))·τ, E_max} for one controller epoch.
pub fn epoch_step(params: &DeviceParams, e: f64, ctrl: &ControlTuple, h: f64) -> f64 {
    let tau = ctrl.tau;
    let phi = harvested_energy(params, e, ctrl.alpha, ctrl.upsilon, h);
    let q = avg_consumed_energy(params, e, 1.0 / tau);
    (e + (phi - q) * tau).min(params.e_max()).max(0.0)
}
