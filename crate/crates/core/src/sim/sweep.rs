//! Converged operating points over a list of attenuations, for the proposed
//! scheme and the always-on amplifier baseline.

use rayon::prelude::*;

use crate::device_models::ChannelModel;
use crate::energy_evolution::avg_amplifier_power;
use crate::energy_management::Scheme;
use crate::error::{Error, Result};
use crate::units::ratio_to_attenuation_db;

use super::run::{run_scenario_detailed, EpochLog};
use super::scenario::{ChannelScript, ControlMode, Scenario};
use super::trace::SweepRow;

/// Consecutive epochs over which x must stay put.
pub const CONVERGENCE_WINDOW: usize = 20;
/// Largest per-epoch movement of x counted as settled.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Whether x moved less than the tolerance over the last window of epochs.
pub fn is_converged(epochs: &[EpochLog]) -> bool {
    if epochs.len() < CONVERGENCE_WINDOW + 1 {
        return false;
    }
    epochs[epochs.len() - CONVERGENCE_WINDOW - 1..]
        .windows(2)
        .all(|w| (w[1].decision.x - w[0].decision.x).abs() < CONVERGENCE_TOL)
}

/// Runs `sc` at each fixed attenuation under both schemes.
///
/// Rows come back in input order, proposed before baseline for each h.
/// Reported values are those of the last epoch; `converged` is false when x
/// was still moving at the end of the run.
pub fn sweep_attenuation(sc: &Scenario, h_list: &[f64]) -> Result<Vec<SweepRow>> {
    let base = match &sc.control {
        ControlMode::Adaptive(cfg) => cfg.clone(),
        ControlMode::Fixed(_) => {
            return Err(Error::Scenario("sweeps need an adaptive controller".into()))
        }
    };
    let jobs: Vec<(f64, Scheme)> = h_list
        .iter()
        .flat_map(|&h| [(h, Scheme::Proposed), (h, Scheme::NoDutyCycling)])
        .collect();
    jobs.par_iter()
        .map(|&(h, scheme)| {
            let mut run = sc.clone();
            run.channel = ChannelScript::Model(ChannelModel::fixed(h)?);
            let mut cfg = base.clone();
            cfg.scheme = scheme;
            run.control = ControlMode::Adaptive(cfg);
            let out = run_scenario_detailed(&run)?;
            let last = out.epochs.last().ok_or_else(|| {
                Error::Scenario(format!("no controller epoch ran at h = {h}"))
            })?;
            let t = last.decision.tuple;
            Ok(SweepRow {
                attenuation_db: ratio_to_attenuation_db(h),
                h,
                scheme,
                alpha: t.alpha,
                upsilon: t.upsilon,
                tau: t.tau,
                p_cons: avg_amplifier_power(&run.device.amplifier, t.alpha, t.upsilon),
                case: Some(last.decision.case),
                converged: is_converged(&out.epochs),
                epochs: out.epochs.len() as u64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_management::CaseLabel;
    use crate::units::attenuation_db_to_ratio;

    #[test]
    fn mild_attenuation_duty_cycles_only_the_proposed_scheme() {
        let h = attenuation_db_to_ratio(16.69);
        let sc = Scenario::reference(h, 8000).unwrap();
        let rows = sweep_attenuation(&sc, &[h]).unwrap();
        assert_eq!(rows.len(), 2);
        let (p, b) = (&rows[0], &rows[1]);
        assert_eq!(p.scheme, Scheme::Proposed);
        assert!(p.alpha < 1.0 && p.case == Some(CaseLabel::I));
        assert!((p.upsilon - 0.02 / h).abs() < 1e-12);
        assert_eq!(b.alpha, 1.0);
        assert!(p.p_cons < b.p_cons);
        assert!(p.converged && b.converged);
    }

    #[test]
    fn fixed_control_is_rejected() {
        let mut sc = Scenario::reference(0.01, 10).unwrap();
        sc.control = ControlMode::Fixed(crate::energy_management::ControlTuple {
            alpha: 1.0,
            upsilon: 1.0,
            tau: 1.0,
        });
        assert!(sweep_attenuation(&sc, &[0.01]).is_err());
    }
}
