//! Frame-by-frame closed-loop run of one scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::energy_evolution::{
    avg_amplifier_power, discrete_step, integrate_frame_ledger, sensor_energy,
};
use crate::energy_management::{
    epoch_decision, CaseLabel, ControlTuple, ControllerState, Decision, SensorReport,
};
use crate::error::Result;

use super::node::{node_step, NodeState};
use super::scenario::{ControlMode, Integrator, Scenario};
use super::trace::TraceRecord;

/// One controller epoch as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub frame: u64,
    pub decision: Decision,
    pub beacon_received: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub epochs: Vec<EpochLog>,
}

impl RunOutput {
    pub fn brownout_frames(&self) -> usize {
        self.records.iter().filter(|r| r.brownout).count()
    }
}

fn normal(std: f64) -> Option<Normal<f64>> {
    (std > 0.0).then(|| Normal::new(0.0, std).expect("std is finite and positive"))
}

/// Runs the scenario and returns one record per frame.
pub fn run_scenario(sc: &Scenario) -> Result<Vec<TraceRecord>> {
    Ok(run_scenario_detailed(sc)?.records)
}

/// Runs the scenario, also returning the controller's per-epoch decisions.
///
/// Per frame: resolve h; if the node wakes, it reports (Ē, S̄) measured under
/// the tuple in force, the controller decides and the new tuple applies to
/// this frame; then the stored energy is advanced one frame.
pub fn run_scenario_detailed(sc: &Scenario) -> Result<RunOutput> {
    sc.validate()?;
    let p = &sc.device;
    let t_frame = p.timing.frame_len;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed.unwrap_or(0));
    let e_noise = normal(sc.noise.energy_std);
    let s_noise = normal(sc.noise.rx_power_std);

    let (mut controller, mut tuple) = match &sc.control {
        ControlMode::Adaptive(cfg) => {
            let st = ControllerState::new(cfg.clone())?;
            let t = st.last;
            (Some(st), t)
        }
        ControlMode::Fixed(t) => (None, *t),
    };
    let mut node = NodeState::new(tuple.applied_tau());
    let mut case: Option<CaseLabel> = None;
    let mut h_est: Option<f64> = None;
    let mut energy = sc.initial_energy;
    let mut epoch = 0u64;

    let mut records = Vec::with_capacity(sc.frames as usize);
    let mut epochs = Vec::new();

    for k in 0..sc.frames {
        let time = k as f64 * t_frame;
        let h = sc.channel.attenuation(time)?;
        let brownout = energy < p.e_min();
        let mut awake = false;
        let mut epoch_index = None;

        if !brownout && node.sigma == 0 {
            let beacon_ok = !(sc.beacon_loss > 0.0 && rng.gen::<f64>() < sc.beacon_loss);
            if let Some(st) = controller.as_mut() {
                let mut e_meas = energy;
                if let Some(n) = &e_noise {
                    e_meas = (e_meas + n.sample(&mut rng)).max(0.0);
                }
                let mut s_meas = h * tuple.upsilon;
                if let Some(n) = &s_noise {
                    s_meas = (s_meas + n.sample(&mut rng)).max(0.0);
                }
                let report = SensorReport {
                    energy_meas: e_meas,
                    rx_power_meas: s_meas,
                    epoch_index: epoch,
                };
                let (decision, next) = epoch_decision(st, &report);
                *st = next;
                tuple = decision.tuple;
                case = Some(decision.case);
                h_est = decision.h_estimate;
                epochs.push(EpochLog {
                    frame: k,
                    decision,
                    beacon_received: beacon_ok,
                });
            }
            node = node_step(node, beacon_ok, tuple.applied_tau());
            awake = true;
            epoch_index = Some(epoch);
            epoch += 1;
        } else if !brownout {
            node = node_step(node, true, tuple.applied_tau());
        }

        let (next, sensor) = match sc.integrator {
            Integrator::Ode { dt } => {
                let l = integrate_frame_ledger(p, energy, tuple.alpha, tuple.upsilon, h, awake, dt);
                (l.energy, l.sensor)
            }
            Integrator::Discrete => (
                discrete_step(p, energy, tuple.alpha, tuple.upsilon, h, awake),
                sensor_energy(p, energy, awake),
            ),
        };

        records.push(TraceRecord {
            frame: k,
            epoch: epoch_index,
            time,
            energy,
            voltage: p.supercap.voltage(energy),
            alpha: tuple.alpha,
            upsilon: tuple.upsilon,
            tau: tuple.tau,
            h_true: h,
            h_est,
            p_cons: avg_amplifier_power(&p.amplifier, tuple.alpha, tuple.upsilon),
            p_sensor: sensor / t_frame,
            awake,
            brownout,
            case,
        });
        energy = next;
    }
    Ok(RunOutput { records, epochs })
}

/// Tuple in force at the end of a run, if any frame was simulated.
pub fn final_tuple(out: &RunOutput) -> Option<ControlTuple> {
    out.records.last().map(|r| ControlTuple {
        alpha: r.alpha,
        upsilon: r.upsilon,
        tau: r.tau,
    })
}
