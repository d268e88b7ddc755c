//! Bundled reference hardware: measured load table, supercapacitor and
//! frame timing of the testbed node, plus the synthetic amplifier PAE curve
//! and harvester I-V surface shipped under `fixtures/`.

use crate::calibration::{parse_iv_surface, parse_pae_curve};
use crate::device_models::{
    AmplifierModel, DeviceParams, HarvesterIvSurface, LoadTable, ModeDurations, ModeLoad,
    PaeCurve, SupercapModel,
};
use crate::units::dbm_to_watts;

pub const HARVESTER_IV_CSV: &str = include_str!("../fixtures/harvester_iv.csv");
pub const AMPLIFIER_PAE_CSV: &str = include_str!("../fixtures/amplifier_pae.csv");

pub const FRAME_LEN: f64 = 0.1;
pub const T_RX: f64 = 2.34e-3;
pub const T_ACT: f64 = 5.01e-3;
pub const T_TX: f64 = 1.81e-3;

pub const CAPACITANCE: f64 = 0.1;
pub const LEAK_RESISTANCE: f64 = 196e3;
pub const V_MIN: f64 = 1.8;
pub const V_MAX: f64 = 3.0;

pub const MAX_OUTPUT: f64 = 2.3;
pub const SOURCE_POWER_DBM: f64 = 6.0;

pub const LOAD_RESISTANCE: f64 = 626.0;
pub const IDLE_CURRENT: f64 = 0.035e-3;
pub const RX_CURRENT: f64 = 15.87e-3;
pub const TX_CURRENT: f64 = 14.55e-3;

pub fn pae_curve() -> PaeCurve {
    parse_pae_curve(AMPLIFIER_PAE_CSV, "fixtures/amplifier_pae.csv")
        .expect("bundled PAE fixture is valid")
}

pub fn harvester_surface() -> HarvesterIvSurface {
    parse_iv_surface(HARVESTER_IV_CSV, "fixtures/harvester_iv.csv")
        .expect("bundled I-V fixture is valid")
}

pub fn amplifier() -> AmplifierModel {
    AmplifierModel::new(dbm_to_watts(SOURCE_POWER_DBM), MAX_OUTPUT, pae_curve())
        .expect("reference amplifier is valid")
}

pub fn supercap() -> SupercapModel {
    SupercapModel::new(CAPACITANCE, LEAK_RESISTANCE, V_MIN, V_MAX)
        .expect("reference supercapacitor is valid")
}

pub fn durations() -> ModeDurations {
    ModeDurations {
        rx: T_RX,
        act: T_ACT,
        tx: T_TX,
    }
}

pub fn load_table() -> LoadTable {
    LoadTable::new(
        ModeLoad::new(f64::INFINITY, IDLE_CURRENT),
        ModeLoad::new(LOAD_RESISTANCE, IDLE_CURRENT),
        ModeLoad::new(LOAD_RESISTANCE, RX_CURRENT),
        ModeLoad::new(LOAD_RESISTANCE, TX_CURRENT),
        durations(),
    )
    .expect("reference load table is valid")
}

pub fn device_params() -> DeviceParams {
    DeviceParams::new(
        amplifier(),
        harvester_surface(),
        supercap(),
        load_table(),
        FRAME_LEN,
    )
    .expect("reference device is valid")
}
