//! Adaptive PI energy management: one scalar control variable `x` mapped to
//! (α, Υ, τ), updated at every awake frame from the node's report.

use crate::device_models::DeviceParams;
use crate::energy_evolution::{avg_consumed_energy, harvested_energy};
use crate::error::{Error, Result};

use super::strategy::{CaseLabel, ControlTuple};

/// Which control map the beacon runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Duty-cycled amplifier at the maximum-efficiency power (Case I first).
    Proposed,
    /// Amplifier always on; only Υ and τ are controlled.
    NoDutyCycling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub scheme: Scheme,
    /// Joules.
    pub e_tgt: f64,
    /// Frames.
    pub tau_tgt: f64,
    /// Target receive power Ŝ, watts.
    pub s_tgt: f64,
    /// Proportional gain, per millijoule of error.
    pub c_p: f64,
    /// Integral gain, per millijoule of error.
    pub c_i: f64,
    /// Watts per unit x.
    pub beta_upsilon: f64,
    /// Frames per unit x.
    pub beta_tau: f64,
    pub alpha_min: f64,
    pub upsilon_max: f64,
    pub tau_max: f64,
    /// Lowest transfer power of the no-duty-cycling map, watts.
    pub upsilon_floor: f64,
    /// Weight of the newest channel estimate; 1 disables smoothing.
    pub smoothing: f64,
}

impl ControllerConfig {
    /// Settings of the reference experiment.
    pub fn reference(scheme: Scheme) -> Self {
        ControllerConfig {
            scheme,
            e_tgt: 0.38,
            tau_tgt: 1.0,
            s_tgt: 0.02,
            c_p: 0.0,
            c_i: 0.01,
            beta_upsilon: 0.1,
            beta_tau: 1.0,
            alpha_min: 0.1,
            upsilon_max: 2.3,
            tau_max: 100.0,
            upsilon_floor: 1e-3,
            smoothing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            return bad(format!("alpha_min must lie in (0, 1), got {}", self.alpha_min));
        }
        if !(self.c_i >= 0.0 && self.c_p >= 0.0) {
            return bad("PI gains must be >= 0".into());
        }
        if !(self.beta_upsilon > 0.0 && self.beta_tau > 0.0) {
            return bad("beta_upsilon and beta_tau must be > 0".into());
        }
        if !(self.upsilon_max > 0.0) {
            return bad("upsilon_max must be > 0".into());
        }
        if !(self.tau_tgt >= 1.0 && self.tau_max >= self.tau_tgt) {
            return bad(format!(
                "need 1 <= tau_tgt <= tau_max (got {}, {})",
                self.tau_tgt, self.tau_max
            ));
        }
        if !(self.s_tgt > 0.0 && self.e_tgt > 0.0) {
            return bad("s_tgt and e_tgt must be > 0".into());
        }
        if !(self.upsilon_floor > 0.0 && self.upsilon_floor <= self.upsilon_max) {
            return bad("upsilon_floor must lie in (0, upsilon_max]".into());
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return bad("smoothing must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Tuple in force before the first report arrives.
    pub fn bootstrap(&self) -> ControlTuple {
        let alpha = match self.scheme {
            Scheme::Proposed => self.alpha_min,
            Scheme::NoDutyCycling => 1.0,
        };
        ControlTuple {
            alpha,
            upsilon: self.upsilon_max,
            tau: self.tau_tgt,
        }
    }
}

/// Measurements carried by an awake frame's report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReport {
    /// Ē, joules.
    pub energy_meas: f64,
    /// S̄, watts.
    pub rx_power_meas: f64,
    pub epoch_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub config: ControllerConfig,
    /// Accumulated energy error, millijoules.
    pub integral_error: f64,
    pub x: f64,
    pub h_estimate: Option<f64>,
    pub last: ControlTuple,
    pub epochs: u64,
}

impl ControllerState {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        let last = config.bootstrap();
        Ok(ControllerState {
            config,
            integral_error: 0.0,
            x: 0.0,
            h_estimate: None,
            last,
            epochs: 0,
        })
    }
}

/// Knees (κ₁, κ₂) of the control map at the current Υ̂.
pub fn kappas(cfg: &ControllerConfig, upsilon_hat: f64) -> (f64, f64) {
    match cfg.scheme {
        Scheme::Proposed => {
            let k1 = 1.0 - cfg.alpha_min;
            (k1, (cfg.upsilon_max - upsilon_hat) / cfg.beta_upsilon + k1)
        }
        Scheme::NoDutyCycling => (0.0, (cfg.upsilon_max - cfg.upsilon_floor) / cfg.beta_upsilon),
    }
}

/// Upper clamp of x: the value at which τ reaches τ_max.
pub fn x_max(cfg: &ControllerConfig, upsilon_hat: f64) -> f64 {
    kappas(cfg, upsilon_hat).1 + (cfg.tau_max - cfg.tau_tgt) / cfg.beta_tau
}

/// ω(x): piecewise-linear map from the control variable to (α, Υ, τ).
pub fn control_map(cfg: &ControllerConfig, x: f64, upsilon_hat: f64) -> ControlTuple {
    let (k1, k2) = kappas(cfg, upsilon_hat);
    let (alpha, upsilon, tau) = match cfg.scheme {
        Scheme::Proposed if x <= k1 => (x + cfg.alpha_min, upsilon_hat, cfg.tau_tgt),
        Scheme::Proposed if x <= k2 => (1.0, cfg.beta_upsilon * (x - k1) + upsilon_hat, cfg.tau_tgt),
        Scheme::NoDutyCycling if x <= k2 => {
            (1.0, cfg.upsilon_floor + cfg.beta_upsilon * x, cfg.tau_tgt)
        }
        _ => (1.0, cfg.upsilon_max, cfg.beta_tau * (x - k2) + cfg.tau_tgt),
    };
    ControlTuple {
        alpha,
        upsilon,
        tau,
    }
}

/// Regime of x under the current map.
pub fn classify(cfg: &ControllerConfig, x: f64, upsilon_hat: f64) -> CaseLabel {
    let (k1, k2) = kappas(cfg, upsilon_hat);
    if cfg.scheme == Scheme::Proposed && x <= k1 {
        CaseLabel::I
    } else if x <= k2 {
        CaseLabel::II
    } else {
        CaseLabel::III
    }
}

/// PI law on the energy error in millijoules, clamped to `[0, x_max]`.
///
/// The integral is limited so that the output lands exactly on a clamp bound
/// rather than winding past it; while the error keeps pushing against the
/// bound the integral stays put.
pub fn pi_update(state: &mut ControllerState, report: &SensorReport, upsilon_hat: f64) -> f64 {
    let cfg = &state.config;
    let err = (cfg.e_tgt - report.energy_meas) * 1e3;
    let hi = x_max(cfg, upsilon_hat);
    let p = cfg.c_p * err;
    if cfg.c_i > 0.0 {
        let lo_i = (0.0 - p) / cfg.c_i;
        let hi_i = (hi - p) / cfg.c_i;
        let next = state.integral_error + err;
        state.integral_error = if lo_i <= hi_i {
            next.clamp(lo_i, hi_i)
        } else {
            next
        };
    }
    let x = (p + cfg.c_i * state.integral_error).clamp(0.0, hi);
    state.x = x;
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub h: Option<f64>,
    /// The report carried no receive power and the previous estimate was kept.
    pub retained: bool,
}

/// h = S̄/Υ, exponentially smoothed with weight `smoothing` on the new value.
pub fn estimate_channel(
    previous: Option<f64>,
    smoothing: f64,
    report: &SensorReport,
    last_upsilon: f64,
) -> ChannelEstimate {
    if !(report.rx_power_meas > 0.0) || !(last_upsilon > 0.0) {
        return ChannelEstimate {
            h: previous,
            retained: true,
        };
    }
    let raw = (report.rx_power_meas / last_upsilon).min(1.0);
    let h = match previous {
        Some(prev) => smoothing * raw + (1.0 - smoothing) * prev,
        None => raw,
    };
    ChannelEstimate {
        h: Some(h),
        retained: false,
    }
}

/// Everything decided at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub tuple: ControlTuple,
    pub case: CaseLabel,
    pub x: f64,
    pub h_estimate: Option<f64>,
    pub upsilon_hat: f64,
    pub channel_retained: bool,
    /// τ sits at τ_max, so reports arrive at the slowest allowed rate.
    pub starved: bool,
}

/// Υ̂ = S_tgt/h clamped to (0, Υ_max]; Υ_max while the channel is unknown.
pub fn live_upsilon_hat(cfg: &ControllerConfig, h: Option<f64>) -> f64 {
    match h {
        Some(h) if h > 0.0 => (cfg.s_tgt / h).min(cfg.upsilon_max),
        _ => cfg.upsilon_max,
    }
}

/// One controller epoch: channel estimate, Υ̂, PI update and control map.
pub fn epoch_decision(state: &ControllerState, report: &SensorReport) -> (Decision, ControllerState) {
    let mut next = state.clone();
    let est = estimate_channel(state.h_estimate, state.config.smoothing, report, state.last.upsilon);
    next.h_estimate = est.h;
    let upsilon_hat = live_upsilon_hat(&next.config, est.h);
    let x = pi_update(&mut next, report, upsilon_hat);
    let mut tuple = control_map(&next.config, x, upsilon_hat);
    tuple.tau = tuple.tau.min(next.config.tau_max);
    let case = classify(&next.config, x, upsilon_hat);
    next.last = tuple;
    next.epochs += 1;
    let starved = tuple.tau >= next.config.tau_max - 1e-9;
    (
        Decision {
            tuple,
            case,
            x,
            h_estimate: est.h,
            upsilon_hat,
            channel_retained: est.retained,
            starved,
        },
        next,
    )
}

/// Δ(E, x): net stored-energy change over one epoch under ω(x), before the
/// E_max clamp.
pub fn delta(
    params: &DeviceParams,
    cfg: &ControllerConfig,
    e: f64,
    x: f64,
    upsilon_hat: f64,
    h: f64,
) -> f64 {
    let w = control_map(cfg, x, upsilon_hat);
    let phi = harvested_energy(params, e, w.alpha, w.upsilon, h);
    (phi - avg_consumed_energy(params, e, 1.0 / w.tau)) * w.tau
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ControllerConfig {
        ControllerConfig::reference(Scheme::Proposed)
    }

    fn report(e: f64, s: f64) -> SensorReport {
        SensorReport {
            energy_meas: e,
            rx_power_meas: s,
            epoch_index: 0,
        }
    }

    #[test]
    fn map_branch_points() {
        let c = cfg();
        let u_hat = 1.0;
        let (k1, k2) = kappas(&c, u_hat);
        assert_eq!(control_map(&c, 0.0, u_hat), ControlTuple { alpha: 0.1, upsilon: 1.0, tau: 1.0 });
        let at_k1 = control_map(&c, k1, u_hat);
        assert!((at_k1.alpha - 1.0).abs() < 1e-15 && at_k1.upsilon == 1.0 && at_k1.tau == 1.0);
        let past = control_map(&c, k2 + 1.0, u_hat);
        assert_eq!(past.alpha, 1.0);
        assert!((past.upsilon - 2.3).abs() < 1e-12);
        assert!((past.tau - 2.0).abs() < 1e-12);
        // κ₂ = (2.3 − 1.0)/0.1 + 0.9
        assert!((k2 - 13.9).abs() < 1e-12);
    }

    #[test]
    fn map_is_continuous_at_knees() {
        for scheme in [Scheme::Proposed, Scheme::NoDutyCycling] {
            let c = ControllerConfig::reference(scheme);
            for u_hat in [0.05, 0.7, 2.3] {
                let (k1, k2) = kappas(&c, u_hat);
                for k in [k1, k2] {
                    let a = control_map(&c, k - 1e-12, u_hat);
                    let b = control_map(&c, k + 1e-12, u_hat);
                    assert!((a.alpha - b.alpha).abs() < 1e-9);
                    assert!((a.upsilon - b.upsilon).abs() < 1e-9);
                    assert!((a.tau - b.tau).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn baseline_map_keeps_amplifier_on() {
        let c = ControllerConfig::reference(Scheme::NoDutyCycling);
        for k in 0..200 {
            let x = 0.2 * k as f64;
            let t = control_map(&c, x, 0.5);
            assert_eq!(t.alpha, 1.0);
            assert!(t.upsilon >= c.upsilon_floor && t.upsilon <= c.upsilon_max + 1e-12);
        }
        assert_eq!(classify(&c, 0.0, 0.5), CaseLabel::II);
    }

    #[test]
    fn pi_zero_error_holds_x() {
        let mut s = ControllerState::new(cfg()).unwrap();
        for _ in 0..10 {
            assert_eq!(pi_update(&mut s, &report(0.38, 0.02), 1.0), 0.0);
        }
    }

    #[test]
    fn pi_integrates_in_millijoules() {
        let mut s = ControllerState::new(cfg()).unwrap();
        for i in 1..=5 {
            let x = pi_update(&mut s, &report(0.37, 0.02), 1.0);
            assert!((x - 0.1 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_anti_windup() {
        let mut s = ControllerState::new(cfg()).unwrap();
        for _ in 0..50 {
            assert_eq!(pi_update(&mut s, &report(0.45, 0.02), 1.0), 0.0);
        }
        assert_eq!(s.integral_error, 0.0);
        // pinned at the top, then released by a single negative error
        let top = x_max(&s.config, 1.0);
        for _ in 0..10_000 {
            pi_update(&mut s, &report(0.2, 0.02), 1.0);
        }
        assert!((s.x - top).abs() < 1e-9);
        let x = pi_update(&mut s, &report(0.39, 0.02), 1.0);
        assert!((x - (top - 0.1)).abs() < 1e-9);
    }

    #[test]
    fn channel_estimates() {
        let r = report(0.38, 0.023);
        let e = estimate_channel(None, 1.0, &r, 2.3);
        assert!((e.h.unwrap() - 0.01).abs() < 1e-15 && !e.retained);
        assert_eq!(estimate_channel(None, 1.0, &report(0.38, 1.5), 1.5).h, Some(1.0));
        let kept = estimate_channel(Some(0.02), 1.0, &report(0.38, 0.0), 2.3);
        assert_eq!(kept.h, Some(0.02));
        assert!(kept.retained);
        let smooth = estimate_channel(Some(0.02), 0.5, &r, 2.3);
        assert!((smooth.h.unwrap() - 0.015).abs() < 1e-15);
    }

    #[test]
    fn steady_report_is_fixed_point() {
        let mut s = ControllerState::new(cfg()).unwrap();
        let h = 0.01;
        let (first, next) = epoch_decision(&s, &report(0.38, h * s.last.upsilon));
        s = next;
        for _ in 0..20 {
            let (d, next) = epoch_decision(&s, &report(0.38, h * s.last.upsilon));
            assert_eq!(d.tuple, first.tuple);
            s = next;
        }
        assert!((first.upsilon_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn epoch_decision_flags_saturation() {
        let mut s = ControllerState::new(cfg()).unwrap();
        let mut last = None;
        for _ in 0..20_000 {
            let (d, next) = epoch_decision(&s, &report(0.2, 1e-6 * s.last.upsilon));
            s = next;
            last = Some(d);
        }
        let d = last.unwrap();
        assert!(d.starved);
        assert_eq!(d.case, CaseLabel::III);
        assert_eq!(d.tuple.tau, 100.0);
        assert_eq!(d.tuple.alpha, 1.0);
    }
}
