//! Scenario files.
//!
//! A scenario is a TOML document. Physical quantities are written either as
//! strings with a unit suffix (`"380 mJ"`, `"2.34 ms"`, `"16.69 dB"`) or as
//! bare numbers in SI units. Every section except `[run]` is optional and
//! defaults to the bundled reference node. Fixture paths are resolved
//! relative to the scenario file.
//!
//! ```toml
//! [run]
//! frames = 10000
//! seed = 7                    # required if any noise or beacon loss is set
//! integrator = "ode"          # or "discrete"
//! step = "1 ms"               # maximum ODE step
//! initial_energy = "380 mJ"
//! energy_noise = "0 mJ"       # std of the reported stored energy
//! rx_power_noise = "0 mW"     # std of the reported receive power
//! beacon_loss = 0.0           # probability that an awake frame misses its beacon
//!
//! [frame]
//! length = "100 ms"
//! rx = "2.34 ms"
//! active = "5.01 ms"
//! tx = "1.81 ms"
//!
//! [amplifier]
//! pae_curve = "pae.csv"
//! source_power = "6 dBm"
//! max_output = "2.3 W"
//!
//! [harvester]
//! iv_surface = "iv.csv"
//!
//! [supercap]
//! capacitance = "0.1 F"
//! leak_resistance = "196 kohm"   # "inf ohm" disables leakage
//! v_min = "1.8 V"
//! v_max = "3.0 V"
//!
//! [loads]
//! idle = { resistance = "inf ohm", current = "0.035 mA" }
//! active = { resistance = "626 ohm", current = "0.035 mA" }
//! rx = { resistance = "626 ohm", current = "15.87 mA" }
//! tx = { resistance = "626 ohm", current = "14.55 mA" }
//!
//! [channel]
//! kind = "schedule"           # "fixed" | "schedule" | "path_loss"
//! dwell = "100 s"
//! attenuations = ["16.69 dB", "20.66 dB"]
//! # kind = "fixed":      attenuation = "16.69 dB"
//! # kind = "path_loss":  g_ref = 0.01, exponent = 3.31, dwell, distances = ["1 m", "2 m"]
//!
//! [controller]
//! mode = "adaptive"           # or "fixed" with alpha, upsilon, tau
//! scheme = "proposed"         # or "no_duty_cycling"
//! e_tgt = "380 mJ"
//! tau_tgt = 1
//! s_tgt = "20 mW"
//! c_p = 0.0
//! c_i = 0.01
//! beta_upsilon = "100 mW"
//! beta_tau = 1
//! alpha_min = 0.1
//! tau_max = 100
//! upsilon_floor = "1 mW"
//! smoothing = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calibration::{load_iv_surface, load_pae_curve};
use crate::device_models::{
    channel_attenuation, AmplifierModel, ChannelModel, DeviceParams, LoadTable, ModeDurations,
    ModeLoad, SupercapModel,
};
use crate::energy_management::{ControlTuple, ControllerConfig, Scheme};
use crate::error::{Error, Result};
use crate::reference;
use crate::units::{Dimension, Quantity};

/// How the stored energy is advanced each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// RK4 on the stored-energy ODE with the given maximum step, seconds.
    Ode { dt: f64 },
    /// Frozen-energy frame map.
    Discrete,
}

/// Time-varying attenuation seen by the node.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelScript {
    Model(ChannelModel),
    /// Path loss evaluated at a piecewise-constant distance `(start s, d m)`.
    PathLoss {
        model: ChannelModel,
        distances: Vec<(f64, f64)>,
    },
}

impl ChannelScript {
    pub fn attenuation(&self, t: f64) -> Result<f64> {
        match self {
            ChannelScript::Model(m) => channel_attenuation(m, 1.0, t),
            ChannelScript::PathLoss { model, distances } => {
                let idx = distances.partition_point(|&(start, _)| start <= t);
                let d = distances[idx.max(1) - 1].1;
                channel_attenuation(model, d, t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlMode {
    Adaptive(ControllerConfig),
    /// Open loop: the same tuple every frame.
    Fixed(ControlTuple),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    /// Standard deviation of the reported stored energy, joules.
    pub energy_std: f64,
    /// Standard deviation of the reported receive power, watts.
    pub rx_power_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub device: DeviceParams,
    pub channel: ChannelScript,
    pub control: ControlMode,
    pub initial_energy: f64,
    pub frames: u64,
    pub seed: Option<u64>,
    pub noise: NoiseConfig,
    pub beacon_loss: f64,
    pub integrator: Integrator,
}

impl Scenario {
    /// Reference node at a fixed attenuation under the reference controller.
    pub fn reference(h: f64, frames: u64) -> Result<Self> {
        Ok(Scenario {
            device: reference::device_params(),
            channel: ChannelScript::Model(ChannelModel::fixed(h)?),
            control: ControlMode::Adaptive(ControllerConfig::reference(Scheme::Proposed)),
            initial_energy: 0.38,
            frames,
            seed: None,
            noise: NoiseConfig::default(),
            beacon_loss: 0.0,
            integrator: Integrator::Ode { dt: 1e-3 },
        })
    }

    pub fn is_stochastic(&self) -> bool {
        self.noise.energy_std > 0.0 || self.noise.rx_power_std > 0.0 || self.beacon_loss > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Scenario("run length must be at least one frame".into()));
        }
        if self.is_stochastic() && self.seed.is_none() {
            return Err(Error::Scenario(
                "a seed is required when noise or beacon loss is enabled".into(),
            ));
        }
        if !(self.noise.energy_std >= 0.0 && self.noise.rx_power_std >= 0.0) {
            return Err(Error::Scenario("noise standard deviations must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.beacon_loss) {
            return Err(Error::Scenario("beacon_loss must lie in [0, 1]".into()));
        }
        if !(self.initial_energy >= 0.0 && self.initial_energy <= self.device.e_max()) {
            return Err(Error::Scenario(format!(
                "initial energy {} J outside [0, {}] J",
                self.initial_energy,
                self.device.e_max()
            )));
        }
        if let Integrator::Ode { dt } = self.integrator {
            if !(dt > 0.0) {
                return Err(Error::Scenario("integration step must be > 0".into()));
            }
        }
        match &self.control {
            ControlMode::Adaptive(cfg) => {
                cfg.validate()?;
                if (cfg.upsilon_max - self.device.amplifier.max_output).abs() > 1e-12 {
                    return Err(Error::Scenario(
                        "controller upsilon_max differs from the amplifier's maximum output".into(),
                    ));
                }
            }
            ControlMode::Fixed(t) => {
                if !(t.alpha >= 0.0 && t.alpha <= 1.0)
                    || !(t.upsilon > 0.0 && t.upsilon <= self.device.amplifier.max_output)
                    || !(t.tau >= 1.0)
                {
                    return Err(Error::Scenario(format!("invalid fixed tuple {t:?}")));
                }
            }
        }
        self.channel.attenuation(0.0)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let file: File =
            toml::from_str(text).map_err(|e| Error::Scenario(format!("invalid scenario: {e}")))?;
        file.build(base_dir)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Q {
    Num(f64),
    Text(String),
}

impl Q {
    fn get(&self, dim: Dimension, key: &str) -> Result<f64> {
        match self {
            Q::Num(v) => Ok(*v),
            Q::Text(s) => Quantity::parse(s)
                .and_then(|q| q.expect(dim))
                .map_err(|e| Error::Scenario(format!("{key}: {e}"))),
        }
    }
}

fn qty(q: &Option<Q>, dim: Dimension, key: &str, default: f64) -> Result<f64> {
    q.as_ref().map_or(Ok(default), |q| q.get(dim, key))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    run: RunSection,
    #[serde(default)]
    frame: FrameSection,
    #[serde(default)]
    amplifier: AmplifierSection,
    #[serde(default)]
    harvester: HarvesterSection,
    #[serde(default)]
    supercap: SupercapSection,
    #[serde(default)]
    loads: LoadsSection,
    channel: Option<ChannelSection>,
    #[serde(default)]
    controller: ControllerSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    frames: u64,
    seed: Option<u64>,
    integrator: Option<String>,
    step: Option<Q>,
    initial_energy: Option<Q>,
    energy_noise: Option<Q>,
    rx_power_noise: Option<Q>,
    beacon_loss: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameSection {
    length: Option<Q>,
    rx: Option<Q>,
    active: Option<Q>,
    tx: Option<Q>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmplifierSection {
    pae_curve: Option<PathBuf>,
    source_power: Option<Q>,
    max_output: Option<Q>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HarvesterSection {
    iv_surface: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupercapSection {
    capacitance: Option<Q>,
    leak_resistance: Option<Q>,
    v_min: Option<Q>,
    v_max: Option<Q>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadsSection {
    idle: Option<LoadEntry>,
    active: Option<LoadEntry>,
    rx: Option<LoadEntry>,
    tx: Option<LoadEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadEntry {
    resistance: Option<Q>,
    current: Option<Q>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    kind: String,
    attenuation: Option<Q>,
    dwell: Option<Q>,
    attenuations: Option<Vec<Q>>,
    g_ref: Option<f64>,
    exponent: Option<f64>,
    distances: Option<Vec<Q>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    mode: Option<String>,
    scheme: Option<String>,
    e_tgt: Option<Q>,
    tau_tgt: Option<f64>,
    s_tgt: Option<Q>,
    c_p: Option<f64>,
    c_i: Option<f64>,
    beta_upsilon: Option<Q>,
    beta_tau: Option<f64>,
    alpha_min: Option<f64>,
    tau_max: Option<f64>,
    upsilon_floor: Option<Q>,
    smoothing: Option<f64>,
    alpha: Option<f64>,
    upsilon: Option<Q>,
    tau: Option<f64>,
}

impl File {
    fn build(self, base: &Path) -> Result<Scenario> {
        use Dimension::*;
        let f = &self.frame;
        let frame_len = qty(&f.length, Time, "frame.length", reference::FRAME_LEN)?;
        let durations = ModeDurations {
            rx: qty(&f.rx, Time, "frame.rx", reference::T_RX)?,
            act: qty(&f.active, Time, "frame.active", reference::T_ACT)?,
            tx: qty(&f.tx, Time, "frame.tx", reference::T_TX)?,
        };

        let a = &self.amplifier;
        let pae = match &a.pae_curve {
            Some(p) => load_pae_curve(&base.join(p))?,
            None => reference::pae_curve(),
        };
        let src = qty(&a.source_power, Power, "amplifier.source_power", reference::amplifier().src_power)?;
        let max_out = qty(&a.max_output, Power, "amplifier.max_output", reference::MAX_OUTPUT)?;
        let amplifier = AmplifierModel::new(src, max_out, pae)?;

        let surface = match &self.harvester.iv_surface {
            Some(p) => load_iv_surface(&base.join(p))?,
            None => reference::harvester_surface(),
        };

        let s = &self.supercap;
        let supercap = SupercapModel::new(
            qty(&s.capacitance, Capacitance, "supercap.capacitance", reference::CAPACITANCE)?,
            qty(&s.leak_resistance, Resistance, "supercap.leak_resistance", reference::LEAK_RESISTANCE)?,
            qty(&s.v_min, Voltage, "supercap.v_min", reference::V_MIN)?,
            qty(&s.v_max, Voltage, "supercap.v_max", reference::V_MAX)?,
        )?;

        let defaults = reference::load_table();
        let entry = |e: &Option<LoadEntry>, m, key: &str| -> Result<ModeLoad> {
            let d = defaults.load(m);
            match e {
                None => Ok(d),
                Some(e) => Ok(ModeLoad::new(
                    qty(&e.resistance, Resistance, &format!("loads.{key}.resistance"), d.resistance)?,
                    qty(&e.current, Current, &format!("loads.{key}.current"), d.current)?,
                )),
            }
        };
        use crate::device_models::SensorMode as M;
        let l = &self.loads;
        let loads = LoadTable::new(
            entry(&l.idle, M::Idle, "idle")?,
            entry(&l.active, M::Active, "active")?,
            entry(&l.rx, M::Receive, "rx")?,
            entry(&l.tx, M::Transmit, "tx")?,
            durations,
        )?;
        let device = DeviceParams::new(amplifier, surface, supercap, loads, frame_len)?;

        let channel = match &self.channel {
            None => return Err(Error::Scenario("missing [channel] section".into())),
            Some(c) => c.build()?,
        };

        let control = self.controller.build(device.amplifier.max_output)?;

        let r = &self.run;
        let integrator = match r.integrator.as_deref().unwrap_or("ode") {
            "ode" => Integrator::Ode {
                dt: qty(&r.step, Time, "run.step", 1e-3)?,
            },
            "discrete" => Integrator::Discrete,
            other => {
                return Err(Error::Scenario(format!(
                    "run.integrator must be \"ode\" or \"discrete\", got {other:?}"
                )))
            }
        };
        let initial_energy = match &control {
            ControlMode::Adaptive(c) => qty(&r.initial_energy, Energy, "run.initial_energy", c.e_tgt)?,
            ControlMode::Fixed(_) => qty(&r.initial_energy, Energy, "run.initial_energy", 0.38)?,
        };
        let sc = Scenario {
            device,
            channel,
            control,
            initial_energy,
            frames: r.frames,
            seed: r.seed,
            noise: NoiseConfig {
                energy_std: qty(&r.energy_noise, Energy, "run.energy_noise", 0.0)?,
                rx_power_std: qty(&r.rx_power_noise, Power, "run.rx_power_noise", 0.0)?,
            },
            beacon_loss: r.beacon_loss.unwrap_or(0.0),
            integrator,
        };
        sc.validate()?;
        Ok(sc)
    }
}

impl ChannelSection {
    fn build(&self) -> Result<ChannelScript> {
        let missing = |k: &str| Error::Scenario(format!("channel.{k} is required for kind {:?}", self.kind));
        let dwell = || -> Result<f64> {
            let d = self.dwell.as_ref().ok_or_else(|| missing("dwell"))?;
            let d = d.get(Dimension::Time, "channel.dwell")?;
            if d > 0.0 {
                Ok(d)
            } else {
                Err(Error::Scenario("channel.dwell must be > 0".into()))
            }
        };
        match self.kind.as_str() {
            "fixed" => {
                let a = self.attenuation.as_ref().ok_or_else(|| missing("attenuation"))?;
                let h = a.get(Dimension::Attenuation, "channel.attenuation")?;
                Ok(ChannelScript::Model(ChannelModel::fixed(h)?))
            }
            "schedule" => {
                let list = self.attenuations.as_ref().ok_or_else(|| missing("attenuations"))?;
                let dwell = dwell()?;
                let steps = list
                    .iter()
                    .enumerate()
                    .map(|(i, q)| Ok((i as f64 * dwell, q.get(Dimension::Attenuation, "channel.attenuations")?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ChannelScript::Model(ChannelModel::schedule(steps)?))
            }
            "path_loss" => {
                let model = ChannelModel::path_loss(
                    self.g_ref.ok_or_else(|| missing("g_ref"))?,
                    self.exponent.ok_or_else(|| missing("exponent"))?,
                )?;
                let list = self.distances.as_ref().ok_or_else(|| missing("distances"))?;
                if list.is_empty() {
                    return Err(Error::Scenario("channel.distances is empty".into()));
                }
                let dwell = dwell()?;
                let distances = list
                    .iter()
                    .enumerate()
                    .map(|(i, q)| Ok((i as f64 * dwell, q.get(Dimension::Length, "channel.distances")?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ChannelScript::PathLoss { model, distances })
            }
            other => Err(Error::Scenario(format!(
                "channel.kind must be fixed, schedule or path_loss, got {other:?}"
            ))),
        }
    }
}

impl ControllerSection {
    fn build(&self, upsilon_max: f64) -> Result<ControlMode> {
        use Dimension::*;
        match self.mode.as_deref().unwrap_or("adaptive") {
            "adaptive" => {
                let scheme = match self.scheme.as_deref().unwrap_or("proposed") {
                    "proposed" => Scheme::Proposed,
                    "no_duty_cycling" => Scheme::NoDutyCycling,
                    other => {
                        return Err(Error::Scenario(format!(
                            "controller.scheme must be proposed or no_duty_cycling, got {other:?}"
                        )))
                    }
                };
                let d = ControllerConfig::reference(scheme);
                Ok(ControlMode::Adaptive(ControllerConfig {
                    scheme,
                    e_tgt: qty(&self.e_tgt, Energy, "controller.e_tgt", d.e_tgt)?,
                    tau_tgt: self.tau_tgt.unwrap_or(d.tau_tgt),
                    s_tgt: qty(&self.s_tgt, Power, "controller.s_tgt", d.s_tgt)?,
                    c_p: self.c_p.unwrap_or(d.c_p),
                    c_i: self.c_i.unwrap_or(d.c_i),
                    beta_upsilon: qty(&self.beta_upsilon, Power, "controller.beta_upsilon", d.beta_upsilon)?,
                    beta_tau: self.beta_tau.unwrap_or(d.beta_tau),
                    alpha_min: self.alpha_min.unwrap_or(d.alpha_min),
                    upsilon_max,
                    tau_max: self.tau_max.unwrap_or(d.tau_max),
                    upsilon_floor: qty(&self.upsilon_floor, Power, "controller.upsilon_floor", d.upsilon_floor)?,
                    smoothing: self.smoothing.unwrap_or(d.smoothing),
                }))
            }
            "fixed" => {
                let missing = |k: &str| Error::Scenario(format!("controller.{k} is required in fixed mode"));
                Ok(ControlMode::Fixed(ControlTuple {
                    alpha: self.alpha.ok_or_else(|| missing("alpha"))?,
                    upsilon: self
                        .upsilon
                        .as_ref()
                        .ok_or_else(|| missing("upsilon"))?
                        .get(Power, "controller.upsilon")?,
                    tau: self.tau.ok_or_else(|| missing("tau"))?,
                }))
            }
            other => Err(Error::Scenario(format!(
                "controller.mode must be adaptive or fixed, got {other:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[run]
frames = 10

[channel]
kind = "fixed"
attenuation = "16.69 dB"
"#;

    #[test]
    fn minimal_scenario_uses_reference_node() {
        let sc = Scenario::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(sc.device, reference::device_params());
        assert_eq!(sc.initial_energy, 0.38);
        assert_eq!(sc.integrator, Integrator::Ode { dt: 1e-3 });
        let h = sc.channel.attenuation(0.0).unwrap();
        assert!((h - 10f64.powf(-1.669)).abs() < 1e-15);
    }

    #[test]
    fn schedule_and_units() {
        let text = r#"
[run]
frames = 10
integrator = "discrete"
initial_energy = "300 mJ"

[supercap]
leak_resistance = "inf ohm"

[channel]
kind = "schedule"
dwell = "100 s"
attenuations = ["20 dB", "30 dB"]

[controller]
beta_upsilon = "200 mW"
scheme = "no_duty_cycling"
"#;
        let sc = Scenario::from_toml_str(text, Path::new(".")).unwrap();
        assert_eq!(sc.integrator, Integrator::Discrete);
        assert!((sc.initial_energy - 0.3).abs() < 1e-15);
        assert_eq!(sc.device.supercap.leak_resistance, f64::INFINITY);
        assert!((sc.channel.attenuation(99.9).unwrap() - 0.01).abs() < 1e-15);
        assert!((sc.channel.attenuation(100.0).unwrap() - 0.001).abs() < 1e-15);
        match sc.control {
            ControlMode::Adaptive(c) => {
                assert_eq!(c.scheme, Scheme::NoDutyCycling);
                assert!((c.beta_upsilon - 0.2).abs() < 1e-15);
            }
            _ => panic!("expected adaptive control"),
        }
    }

    #[test]
    fn path_loss_channel() {
        let text = r#"
[run]
frames = 10
[channel]
kind = "path_loss"
g_ref = 0.01
exponent = 2.0
dwell = "10 s"
distances = ["1 m", "200 cm"]
"#;
        let sc = Scenario::from_toml_str(text, Path::new(".")).unwrap();
        assert!((sc.channel.attenuation(5.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((sc.channel.attenuation(15.0).unwrap() - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn stochastic_runs_need_a_seed() {
        let text = MINIMAL.replace("frames = 10", "frames = 10\nbeacon_loss = 0.1");
        let err = Scenario::from_toml_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("seed"));
        let text = MINIMAL.replace("frames = 10", "frames = 10\nseed = 3\nbeacon_loss = 0.1");
        assert!(Scenario::from_toml_str(&text, Path::new(".")).is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let bad_unit = MINIMAL.replace("16.69 dB", "16.69 mJ");
        assert!(Scenario::from_toml_str(&bad_unit, Path::new(".")).is_err());
        let unknown = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(Scenario::from_toml_str(&unknown, Path::new(".")).is_err());
        let zero = MINIMAL.replace("frames = 10", "frames = 0");
        assert!(Scenario::from_toml_str(&zero, Path::new(".")).is_err());
        let missing = "[run]\nframes = 3\n[amplifier]\npae_curve = \"nope.csv\"\n[channel]\nkind = \"fixed\"\nattenuation = \"20 dB\"\n";
        assert!(matches!(
            Scenario::from_toml_str(missing, Path::new("/nonexistent")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn fixed_mode() {
        let text = format!(
            "{MINIMAL}\n[controller]\nmode = \"fixed\"\nalpha = 0.5\nupsilon = \"1 W\"\ntau = 3\n"
        );
        let sc = Scenario::from_toml_str(&text, Path::new(".")).unwrap();
        assert_eq!(
            sc.control,
            ControlMode::Fixed(ControlTuple { alpha: 0.5, upsilon: 1.0, tau: 3.0 })
        );
    }
}
