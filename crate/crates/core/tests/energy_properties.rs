use proptest::prelude::*;

use wpsn_core::energy_evolution::{discrete_step, integrate_frame, integrate_frame_ledger};
use wpsn_core::reference;
use wpsn_core::units::attenuation_db_to_ratio;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn energy_stays_in_bounds(
        e in 0.0f64..0.45,
        alpha in 0.0f64..=1.0,
        upsilon in 1e-3f64..=2.3,
        db in 5.0f64..45.0,
        awake: bool,
    ) {
        let p = reference::device_params();
        let h = attenuation_db_to_ratio(db);
        let d = discrete_step(&p, e, alpha, upsilon, h, awake);
        let o = integrate_frame(&p, e, alpha, upsilon, h, awake, 1e-3);
        prop_assert!((0.0..=p.e_max()).contains(&d));
        prop_assert!((0.0..=p.e_max()).contains(&o));
    }

    #[test]
    fn discrete_step_monotone_in_alpha_and_h(
        e in 0.2f64..0.44,
        a1 in 0.0f64..=1.0,
        a2 in 0.0f64..=1.0,
        upsilon in 1e-3f64..=2.3,
        db1 in 10.0f64..40.0,
        db2 in 10.0f64..40.0,
        awake: bool,
    ) {
        let p = reference::device_params();
        let (alo, ahi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let h = attenuation_db_to_ratio(db1);
        prop_assert!(
            discrete_step(&p, e, alo, upsilon, h, awake)
                <= discrete_step(&p, e, ahi, upsilon, h, awake)
        );
        let (hlo, hhi) = {
            let (x, y) = (attenuation_db_to_ratio(db1), attenuation_db_to_ratio(db2));
            if x <= y { (x, y) } else { (y, x) }
        };
        prop_assert!(
            discrete_step(&p, e, ahi, upsilon, hlo, awake)
                <= discrete_step(&p, e, ahi, upsilon, hhi, awake)
        );
    }

    #[test]
    fn ledger_balances_away_from_clamps(
        e in 0.2f64..0.4,
        alpha in 0.0f64..=1.0,
        upsilon in 1e-3f64..=2.3,
        db in 15.0f64..40.0,
        awake: bool,
    ) {
        let p = reference::device_params();
        let h = attenuation_db_to_ratio(db);
        let l = integrate_frame_ledger(&p, e, alpha, upsilon, h, awake, 1e-3);
        prop_assume!(l.energy > 0.0 && l.energy < p.e_max());
        let balance = e + l.harvested - l.sensor - l.leakage;
        prop_assert!((l.energy - balance).abs() < 1e-9, "{} vs {}", l.energy, balance);
    }
}
