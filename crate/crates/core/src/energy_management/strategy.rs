//! Minimum-power energy-transfer strategy for a given target, plus the
//! brute-force and dual-function evaluators used to cross-check it.

use std::fmt;

use crate::device_models::DeviceParams;
use crate::energy_evolution::{avg_amplifier_power, avg_consumed_energy, sleep_energy, wake_energy};
use crate::error::{Error, Result};

/// Amplifier duty cycle, energy-transfer power and wake-up interval for one
/// epoch. `tau` stays real-valued until it is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTuple {
    pub alpha: f64,
    pub upsilon: f64,
    pub tau: f64,
}

impl ControlTuple {
    /// Wake-up interval actually used by the node: nearest integer, at least 1.
    pub fn applied_tau(&self) -> u32 {
        let t = self.tau.round();
        if t < 1.0 {
            1
        } else if t > u32::MAX as f64 {
            u32::MAX
        } else {
            t as u32
        }
    }
}

/// Operating regime: which of α, Υ or τ is the active control variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    I,
    II,
    III,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::I => "I",
            CaseLabel::II => "II",
            CaseLabel::III => "III",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transfer power maximising the end-to-end efficiency θ(Υ)·η_E(E, hΥ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxEfficiencyPoint {
    /// Υ̂, watts.
    pub upsilon_hat: f64,
    /// μ̂ = 1/(θ(Υ̂)·η_E·h), 1/watts.
    pub mu_hat: f64,
    /// Ŝ = hΥ̂, watts.
    pub s_hat: f64,
    /// Ĥ = η_E(E, Ŝ)·Ŝ, watts.
    pub h_hat: f64,
}

const SCAN_POINTS: usize = 512;
const SCAN_FLOOR: f64 = 1e-4;

/// θ(Υ)·η_E(e, hΥ).
pub fn end_to_end_efficiency(params: &DeviceParams, e: f64, h: f64, upsilon: f64) -> f64 {
    params.amplifier.pae.eval(upsilon) * params.efficiency_at_energy(e, h * upsilon)
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("attenuation ratio must lie in (0, 1], got {h}")))
    }
}

/// Finds Υ̂ by a log-spaced scan over `(0, Υ_max]` refined by golden-section
/// search inside the bracket around the best scan point.
pub fn max_efficiency_point(params: &DeviceParams, e_tgt: f64, h: f64) -> Result<MaxEfficiencyPoint> {
    check_h(h)?;
    if e_tgt < params.e_min() * (1.0 - 1e-12) || e_tgt > params.e_max() * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "target energy {e_tgt} J outside [{}, {}] J",
            params.e_min(),
            params.e_max()
        )));
    }
    let u_max = params.amplifier.max_output;
    let f = |u: f64| end_to_end_efficiency(params, e_tgt, h, u);
    let lo = u_max * SCAN_FLOOR;
    let ratio = (u_max / lo).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| if i == SCAN_POINTS - 1 { u_max } else { lo * ratio.powi(i as i32) })
        .collect();
    let (best, best_val) = grid
        .iter()
        .enumerate()
        .map(|(i, &u)| (i, f(u)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !(best_val > 0.0) {
        return Err(Error::domain("harvester dead at this attenuation"));
    }

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN_POINTS - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a) <= 1e-12 * b {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // keep the scan winner unless refinement found something strictly better
    let mut upsilon_hat = grid[best];
    let mut peak = best_val;
    for u in [a, b, c, d] {
        let v = f(u);
        if v > peak {
            peak = v;
            upsilon_hat = u;
        }
    }
    let s_hat = h * upsilon_hat;
    Ok(MaxEfficiencyPoint {
        upsilon_hat,
        mu_hat: 1.0 / (peak * h),
        s_hat,
        h_hat: params.efficiency_at_energy(e_tgt, s_hat) * s_hat,
    })
}

/// Result of the minimum-power strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyOutcome {
    Feasible {
        tuple: ControlTuple,
        case: CaseLabel,
        /// Set when the harvested power was found non-monotone in Υ while
        /// solving Case II.
        monotonicity_violation: bool,
    },
    /// Even a permanently-on amplifier at Υ_max cannot cover the sleep-frame
    /// consumption, so no wake-up interval is energy neutral.
    Infeasible { harvested: f64, sleep_consumption: f64 },
}

impl StrategyOutcome {
    pub fn tuple(&self) -> Option<ControlTuple> {
        match self {
            StrategyOutcome::Feasible { tuple, .. } => Some(*tuple),
            StrategyOutcome::Infeasible { .. } => None,
        }
    }

    pub fn case(&self) -> Option<CaseLabel> {
        match self {
            StrategyOutcome::Feasible { case, .. } => Some(*case),
            StrategyOutcome::Infeasible { .. } => None,
        }
    }
}

/// Minimum average amplifier power sustaining `e_tgt` at awake ratio `r_tgt`.
///
/// Energies are compared per frame: `Q(E_tgt, r)` against `Ĥ·T_frame`.
pub fn optimal_strategy(
    params: &DeviceParams,
    e_tgt: f64,
    r_tgt: f64,
    h: f64,
    alpha_min: f64,
) -> Result<StrategyOutcome> {
    if !(r_tgt > 0.0 && r_tgt <= 1.0) {
        return Err(Error::domain(format!("awake ratio must lie in (0, 1], got {r_tgt}")));
    }
    if !(alpha_min > 0.0 && alpha_min < 1.0) {
        return Err(Error::param(format!("alpha_min must lie in (0, 1), got {alpha_min}")));
    }
    let mep = max_efficiency_point(params, e_tgt, h)?;
    let t = params.timing.frame_len;
    let u_max = params.amplifier.max_output;
    let q = avg_consumed_energy(params, e_tgt, r_tgt);
    let tau = 1.0 / r_tgt;
    let harvest = |u: f64| params.efficiency_at_energy(e_tgt, h * u) * h * u * t;

    if q <= mep.h_hat * t {
        let alpha = (q / (mep.h_hat * t)).max(alpha_min);
        return Ok(StrategyOutcome::Feasible {
            tuple: ControlTuple {
                alpha,
                upsilon: mep.upsilon_hat,
                tau,
            },
            case: CaseLabel::I,
            monotonicity_violation: false,
        });
    }

    let full = harvest(u_max);
    if q <= full {
        let (upsilon, violation) = smallest_root(&harvest, q, mep.upsilon_hat, u_max);
        return Ok(StrategyOutcome::Feasible {
            tuple: ControlTuple {
                alpha: 1.0,
                upsilon,
                tau,
            },
            case: CaseLabel::II,
            monotonicity_violation: violation,
        });
    }

    let phi = sleep_energy(params, e_tgt);
    let denom = full - phi;
    if denom <= 0.0 {
        return Ok(StrategyOutcome::Infeasible {
            harvested: full,
            sleep_consumption: phi,
        });
    }
    Ok(StrategyOutcome::Feasible {
        tuple: ControlTuple {
            alpha: 1.0,
            upsilon: u_max,
            tau: wake_energy(params, e_tgt) / denom,
        },
        case: CaseLabel::III,
        monotonicity_violation: false,
    })
}

/// Smallest Υ in `[lo, hi]` with `f(Υ) = target`, assuming `f(lo) < target
/// ≤ f(hi)`. Returns the root and whether `f` was seen to decrease.
fn smallest_root(f: &dyn Fn(f64) -> f64, target: f64, lo: f64, hi: f64) -> (f64, bool) {
    const SCAN: usize = 256;
    let mut violation = false;
    let mut prev_u = lo;
    let mut prev_v = f(lo);
    let mut bracket = (lo, hi);
    for i in 1..=SCAN {
        let u = lo + (hi - lo) * i as f64 / SCAN as f64;
        let v = f(u);
        if v < prev_v {
            violation = true;
        }
        if v >= target {
            bracket = (prev_u, u);
            break;
        }
        prev_u = u;
        prev_v = v;
    }
    let (mut a, mut b) = bracket;
    while (b - a) > 1e-4 * b {
        let m = 0.5 * (a + b);
        if f(m) >= target {
            b = m;
        } else {
            a = m;
        }
    }
    (b, violation)
}

/// Constrained grid optimum of Ω(α, Υ) = αΥ/θ(Υ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub alpha: f64,
    pub upsilon: f64,
    pub omega: f64,
    /// Cell sizes of the grid in α and Υ.
    pub d_alpha: f64,
    pub d_upsilon: f64,
}

/// Exhaustive minimisation of Ω over an `n × n` grid subject to
/// `α·η_E(E_tgt, hΥ)·hΥ·T_frame ≥ Q(E_tgt, r_tgt)`.
///
/// `α_i = α_min + (1 − α_min)·i/(n−1)`, `Υ_j = Υ_max·(j+1)/n`.
pub fn brute_force_optimum(
    params: &DeviceParams,
    e_tgt: f64,
    r_tgt: f64,
    h: f64,
    alpha_min: f64,
    n: usize,
) -> Option<GridOptimum> {
    let u_max = params.amplifier.max_output;
    let t = params.timing.frame_len;
    let q = avg_consumed_energy(params, e_tgt, r_tgt);
    let d_alpha = (1.0 - alpha_min) / (n - 1) as f64;
    let d_upsilon = u_max / n as f64;
    let mut best: Option<GridOptimum> = None;
    for j in 0..n {
        let u = u_max * (j + 1) as f64 / n as f64;
        let per_alpha = params.efficiency_at_energy(e_tgt, h * u) * h * u * t;
        let cost = u / params.amplifier.pae.eval(u);
        for i in 0..n {
            let alpha = alpha_min + (1.0 - alpha_min) * i as f64 / (n - 1) as f64;
            if alpha * per_alpha < q {
                continue;
            }
            // Ω grows with α, so the first feasible α is the best in this column
            let omega = alpha * cost;
            if best.is_none_or(|b| omega < b.omega) {
                best = Some(GridOptimum {
                    alpha,
                    upsilon: u,
                    omega,
                    d_alpha,
                    d_upsilon,
                });
            }
            break;
        }
    }
    best
}

/// Dual function and primal optimum at multiplier `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCheck {
    /// g(μ) = inf over α ∈ [α_min, 1], Υ ∈ (0, Υ_max] of the Lagrangian.
    pub g_mu: f64,
    /// Brute-force constrained optimum of Ω (infinite if no grid point is feasible).
    pub omega_star: f64,
}

/// Lagrangian in power units:
/// `L = αΥ/θ(Υ) − μ·(α·η_E·hΥ − Q/T_frame)`.
pub fn lagrangian(
    params: &DeviceParams,
    e_tgt: f64,
    r_tgt: f64,
    h: f64,
    mu: f64,
    alpha: f64,
    upsilon: f64,
) -> f64 {
    let q_rate = avg_consumed_energy(params, e_tgt, r_tgt) / params.timing.frame_len;
    let harvested = params.efficiency_at_energy(e_tgt, h * upsilon) * h * upsilon;
    avg_amplifier_power(&params.amplifier, alpha, upsilon) - mu * (alpha * harvested - q_rate)
}

/// Evaluates g(μ) and the brute-force primal optimum.
///
/// L is affine in α, so only α ∈ {α_min, 1} are scanned; Υ runs over a
/// 4096-point grid plus Υ̂ and Υ_max. The Υ → 0⁺ limit, where L tends to
/// μ·Q/T_frame, is included as a candidate.
pub fn dual_bound_check(
    params: &DeviceParams,
    e_tgt: f64,
    r_tgt: f64,
    h: f64,
    alpha_min: f64,
    mu: f64,
) -> Result<DualCheck> {
    let u_max = params.amplifier.max_output;
    let q_rate = avg_consumed_energy(params, e_tgt, r_tgt) / params.timing.frame_len;
    let mut candidates: Vec<f64> = (1..=4096).map(|j| u_max * j as f64 / 4096.0).collect();
    if let Ok(mep) = max_efficiency_point(params, e_tgt, h) {
        candidates.push(mep.upsilon_hat);
    }
    let mut g = mu * q_rate;
    for u in candidates {
        for alpha in [alpha_min, 1.0] {
            g = g.min(lagrangian(params, e_tgt, r_tgt, h, mu, alpha, u));
        }
    }
    let omega_star = brute_force_optimum(params, e_tgt, r_tgt, h, alpha_min, 512)
        .map_or(f64::INFINITY, |b| b.omega);
    Ok(DualCheck { g_mu: g, omega_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device_models::{AmplifierModel, HarvesterIvSurface, LoadTable, ModeLoad, PaeCurve};
    use crate::reference;
    use crate::units::attenuation_db_to_ratio;

    /// Surface whose efficiency at every voltage is a bump in dBm peaking at
    /// 10 dBm (10 mW).
    fn bump_surface() -> HarvesterIvSurface {
        let dbm: Vec<f64> = (0..801).map(|i| -10.0 + 0.05 * i as f64).collect();
        let volts = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let grid = volts
            .iter()
            .map(|&v: &f64| {
                dbm.iter()
                    .map(|&d: &f64| {
                        let eff = 0.6 * (-((d - 10.0) / 8.0).powi(2)).exp();
                        let p = 1e-3 * 10f64.powf(d / 10.0);
                        eff * p / v.max(1.0)
                    })
                    .collect()
            })
            .collect();
        HarvesterIvSurface::from_dbm_axis(volts, dbm, grid).unwrap()
    }

    fn device_with(pae: PaeCurve, surface: HarvesterIvSurface) -> DeviceParams {
        DeviceParams::new(
            AmplifierModel::new(0.004, 2.3, pae).unwrap(),
            surface,
            reference::supercap(),
            reference::load_table(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn applied_tau_rounds() {
        let t = |tau| ControlTuple { alpha: 1.0, upsilon: 1.0, tau }.applied_tau();
        assert_eq!(t(0.3), 1);
        assert_eq!(t(1.49), 1);
        assert_eq!(t(2.5), 3);
        assert_eq!(t(8.83), 9);
    }

    #[test]
    fn peak_maps_through_constant_pae() {
        let p = device_with(PaeCurve::constant(0.4, 0.001, 2.3).unwrap(), bump_surface());
        // the bump sits at 10 mW; h = 0.01 puts that at Υ = 1 W
        let e = p.supercap.energy(2.0);
        let m = max_efficiency_point(&p, e, 0.01).unwrap();
        assert!((m.upsilon_hat - 1.0).abs() < 5e-3, "{}", m.upsilon_hat);
        assert!(m.h_hat <= m.s_hat);
    }

    #[test]
    fn increasing_pae_flat_harvester_goes_to_max() {
        // every receive power sits below the table, where current scales
        // linearly with power: η is exactly 0.5 at 3 V
        let flat = {
            let volts = vec![0.0, 4.0];
            let p = vec![10.0, 20.0];
            let grid = vec![vec![0.5 * 10.0 / 3.0, 0.5 * 20.0 / 3.0]; 2];
            HarvesterIvSurface::new(volts, p, grid).unwrap()
        };
        let pae = PaeCurve::new(vec![(0.01, 0.1), (2.3, 0.5)]).unwrap();
        let p = device_with(pae, flat);
        let m = max_efficiency_point(&p, 0.45, 0.01).unwrap();
        assert_eq!(m.upsilon_hat, 2.3);
    }

    #[test]
    fn dead_harvester_is_domain_error() {
        let dead = HarvesterIvSurface::new(vec![0.0, 4.0], vec![1e-4, 1.0], vec![vec![0.0; 2]; 2])
            .unwrap();
        let p = device_with(reference::pae_curve(), dead);
        assert!(matches!(max_efficiency_point(&p, 0.38, 0.01), Err(Error::Domain(_))));
    }

    #[test]
    fn fixture_peak_matches_dense_scan() {
        let p = reference::device_params();
        for db in [16.69, 20.66, 24.63, 28.62, 32.82] {
            let h = attenuation_db_to_ratio(db);
            let m = max_efficiency_point(&p, 0.38, h).unwrap();
            let (mut best_u, mut best) = (0.0, f64::NEG_INFINITY);
            for j in 1..=100_000 {
                let u = 2.3 * j as f64 / 100_000.0;
                let v = end_to_end_efficiency(&p, 0.38, h, u);
                if v > best {
                    best = v;
                    best_u = u;
                }
            }
            assert!((m.upsilon_hat - best_u).abs() <= 2.3 / 100_000.0 + 1e-9 * best_u, "{db} dB");
            assert!(end_to_end_efficiency(&p, 0.38, h, m.upsilon_hat) >= best - 1e-12);
        }
    }

    #[test]
    fn pae_scaling_keeps_argmax() {
        let p = reference::device_params();
        let mut q = p.clone();
        q.amplifier.pae = p.amplifier.pae.scaled(0.5).unwrap();
        let h = attenuation_db_to_ratio(24.63);
        let a = max_efficiency_point(&p, 0.38, h).unwrap();
        let b = max_efficiency_point(&q, 0.38, h).unwrap();
        assert_eq!(a.upsilon_hat, b.upsilon_hat);
        assert!((b.mu_hat / a.mu_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn case_one_alpha_formula() {
        let p = reference::device_params();
        let h = attenuation_db_to_ratio(16.69);
        let m = max_efficiency_point(&p, 0.38, h).unwrap();
        let q = avg_consumed_energy(&p, 0.38, 1.0);
        let out = optimal_strategy(&p, 0.38, 1.0, h, 0.1).unwrap();
        let t = out.tuple().unwrap();
        assert_eq!(out.case(), Some(CaseLabel::I));
        assert!((t.alpha - q / (m.h_hat * 0.1)).abs() < 1e-12);
        assert_eq!(t.upsilon, m.upsilon_hat);
        assert_eq!(t.tau, 1.0);
    }

    #[test]
    fn cases_across_reference_attenuations() {
        let p = reference::device_params();
        let expect = [
            (16.69, CaseLabel::I),
            (20.66, CaseLabel::I),
            (24.63, CaseLabel::I),
            (28.62, CaseLabel::III),
            (32.82, CaseLabel::III),
        ];
        for (db, case) in expect {
            let h = attenuation_db_to_ratio(db);
            let out = optimal_strategy(&p, 0.38, 1.0, h, 0.1).unwrap();
            assert_eq!(out.case(), Some(case), "{db} dB");
        }
        let t = optimal_strategy(&p, 0.38, 1.0, attenuation_db_to_ratio(32.82), 0.1)
            .unwrap()
            .tuple()
            .unwrap();
        assert_eq!(t.upsilon, 2.3);
        assert!(t.tau > 1.0);
    }

    #[test]
    fn case_two_hits_target_energy() {
        // heavier radio loads push Q past Ĥ while Υ̂ is still below Υ_max
        let mut p = reference::device_params();
        let mut found = false;
        for scale in [2.0, 4.0, 8.0, 16.0] {
            p.loads = LoadTable::new(
                ModeLoad::new(f64::INFINITY, reference::IDLE_CURRENT),
                ModeLoad::new(reference::LOAD_RESISTANCE, reference::IDLE_CURRENT),
                ModeLoad::new(reference::LOAD_RESISTANCE, reference::RX_CURRENT * scale),
                ModeLoad::new(reference::LOAD_RESISTANCE, reference::TX_CURRENT * scale),
                reference::durations(),
            )
            .unwrap();
            for k in 0..200 {
                let db = 10.0 + 0.1 * k as f64;
                let h = attenuation_db_to_ratio(db);
                let out = optimal_strategy(&p, 0.38, 1.0, h, 0.1).unwrap();
                if let StrategyOutcome::Feasible {
                    tuple,
                    case: CaseLabel::II,
                    monotonicity_violation,
                } = out
                {
                    let got = p.efficiency_at_energy(0.38, h * tuple.upsilon) * h * tuple.upsilon * 0.1;
                    let q = avg_consumed_energy(&p, 0.38, 1.0);
                    assert!(got >= q && (got / q - 1.0) < 1e-3, "{db} dB x{scale}");
                    assert!(!monotonicity_violation);
                    assert_eq!(tuple.alpha, 1.0);
                    found = true;
                }
            }
        }
        assert!(found, "no Case II operating point found");
    }

    #[test]
    fn case_three_is_energy_neutral_or_infeasible() {
        let p = reference::device_params();
        let h = attenuation_db_to_ratio(30.0);
        let t = optimal_strategy(&p, 0.38, 1.0, h, 0.1).unwrap().tuple().unwrap();
        let phi = crate::energy_evolution::harvested_energy(&p, 0.38, 1.0, 2.3, h);
        let q = avg_consumed_energy(&p, 0.38, 1.0 / t.tau);
        assert!((phi - q).abs() < 1e-15);

        let out = optimal_strategy(&p, 0.38, 1.0, attenuation_db_to_ratio(60.0), 0.1).unwrap();
        assert!(matches!(out, StrategyOutcome::Infeasible { .. }));
    }

    #[test]
    fn weak_duality_and_tight_bound() {
        let p = reference::device_params();
        let h = attenuation_db_to_ratio(16.69);
        let out = optimal_strategy(&p, 0.38, 1.0, h, 0.1).unwrap();
        let t = out.tuple().unwrap();
        let omega = avg_amplifier_power(&p.amplifier, t.alpha, t.upsilon);
        let m = max_efficiency_point(&p, 0.38, h).unwrap();
        for k in 0..10 {
            let mu = m.mu_hat * k as f64;
            let d = dual_bound_check(&p, 0.38, 1.0, h, 0.1, mu).unwrap();
            assert!(d.g_mu <= omega + 1e-9);
        }
        let d = dual_bound_check(&p, 0.38, 1.0, h, 0.1, m.mu_hat).unwrap();
        assert!((d.g_mu - omega).abs() < 1e-6 * omega);
        assert_eq!(dual_bound_check(&p, 0.38, 1.0, h, 0.1, 0.0).unwrap().g_mu, 0.0);
    }
}
