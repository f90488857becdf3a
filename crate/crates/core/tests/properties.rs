use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;

use remp::elliptic::{complete_e, complete_k, ellip_e, ellip_f};
use remp::integrator::{integrate, Channel, IntegratorConfig, Probes};
use remp::invariants::{drift, series, InvariantKind};
use remp::kinematics::RelParams;
use remp::superposition::{consistent_initial_state, superpose};
use remp::systems::{FreqSpec, SystemId, SystemSpec};

fn rel_emp(k2: f64, j: f64) -> SystemSpec {
    SystemSpec::new(
        SystemId::RelEmp,
        FreqSpec::Constant(k2),
        None,
        RelParams::new(1.0, j).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elliptic_half_turn_additivity(phi in -7.0f64..7.0, k in 0.0f64..0.995) {
        let f = ellip_f(phi, k).unwrap();
        let e = ellip_e(phi, k).unwrap();
        prop_assert!((ellip_f(phi + PI, k).unwrap() - f - 2.0 * complete_k(k).unwrap()).abs() < 1e-11);
        prop_assert!((ellip_e(phi + PI, k).unwrap() - e - 2.0 * complete_e(k).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn elliptic_ordering(phi in 0.0f64..FRAC_PI_2, dphi in 1e-6f64..0.5, k in 0.0f64..0.999) {
        let f = ellip_f(phi, k).unwrap();
        let e = ellip_e(phi, k).unwrap();
        prop_assert!(e <= phi + 1e-15 && phi <= f + 1e-15);
        prop_assert!(ellip_f(phi + dphi, k).unwrap() > f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn accumulated_time_is_increasing(
        rho in 0.3f64..2.0, rhodot in -0.6f64..0.6, j in 0.05f64..1.5, k2 in 0.3f64..2.0,
    ) {
        let sp = rel_emp(k2, j);
        let traj = integrate(
            &sp, 0.0, &[0.1, 0.0, rho, rhodot],
            &IntegratorConfig::with_span(20.0, 0.1),
            &Probes::channels(&[Channel::AccumT]),
        ).unwrap();
        let t_acc = traj.channel(Channel::AccumT).unwrap();
        prop_assert!(t_acc.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn every_phase_gives_the_same_invariant(
        rho in 0.5f64..1.5, rhodot in -0.3f64..0.3, j in 0.1f64..1.0, delta in 0.0f64..TAU,
    ) {
        // x = rho sin(J T + delta) has I_R = J^2/2 whatever the phase
        let sp = rel_emp(1.2, j);
        let init = consistent_initial_state(&sp, rho, rhodot, delta).unwrap().to_vec();
        let traj = integrate(
            &sp, 0.0, &init,
            &IntegratorConfig::with_span(15.0, 0.1),
            &Probes::channels(&[Channel::AccumT]),
        ).unwrap();
        for v in series(&traj, &sp, InvariantKind::ErmakovLewis).unwrap() {
            prop_assert!((v - 0.5 * j * j).abs() < 1e-8 * j * j, "{v}");
        }
        let x = traj.component("x").unwrap();
        for (a, b) in superpose(&traj, j, delta).unwrap().iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn oscillator_energy_drift_at_default_tolerances(x0 in -1.5f64..1.5, v0 in -0.9f64..0.9, k2 in 0.5f64..2.0) {
        let sp = SystemSpec::new(SystemId::Rel1d, FreqSpec::Constant(k2), None, RelParams::default()).unwrap();
        let traj = integrate(&sp, 0.0, &[x0, v0], &IntegratorConfig::with_span(100.0, 0.5), &Probes::none())
            .unwrap();
        prop_assert!(drift(&traj, &sp, InvariantKind::Energy).unwrap().max_rel < 1e-8);
    }
}
