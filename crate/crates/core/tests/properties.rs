//! Property tests for the algebraic invariants of the analytic layer.

use proptest::prelude::*;

use nv_sense_core::constants::PhysicalConstants;
use nv_sense_core::metrology::{
    magnetic_sensitivity, readout_fidelity, PhotonModel, SensingMode, SensitivityBudget,
};
use nv_sense_core::noise::relaxometry_population;
use nv_sense_core::protocols::deer_signal;
use nv_sense_core::sequences::{filter_function_closed, FilterShape};

proptest! {
    #[test]
    fn filter_functions_are_nonnegative(
        wt in 0.0f64..5000.0,
        kind in 0usize..6,
        n_half in 1usize..32,
        level in 1u32..5,
    ) {
        let t = 1e-4;
        let shape = match kind {
            0 => FilterShape::Ramsey,
            1 => FilterShape::Hahn,
            2 => FilterShape::Pdd { n: 2 * n_half - 1 },
            3 => FilterShape::Cpmg { n: 2 * n_half },
            4 => FilterShape::Udd { n: n_half },
            _ => FilterShape::Cdd { level },
        };
        let f = filter_function_closed(shape, wt / t, t).unwrap();
        prop_assert!(f >= 0.0 && f.is_finite());
    }

    #[test]
    fn readout_fidelity_monotone_in_brightness_and_contrast(
        n_avg in 1e-3f64..10.0,
        contrast in 0.01f64..0.95,
        dn in 1e-4f64..1.0,
        dc in 1e-4f64..0.04,
    ) {
        let base = readout_fidelity(&PhotonModel::from_avg_contrast(n_avg, contrast).unwrap());
        let brighter =
            readout_fidelity(&PhotonModel::from_avg_contrast(n_avg + dn, contrast).unwrap());
        let crisper =
            readout_fidelity(&PhotonModel::from_avg_contrast(n_avg, contrast + dc).unwrap());
        prop_assert!(brighter > base);
        prop_assert!(crisper > base);
        prop_assert!(base > 0.0 && base < 1.0);
    }

    #[test]
    fn deer_signal_bounded_and_even_in_couplings(
        nu1 in -1e6f64..1e6,
        nu2 in -1e6f64..1e6,
        n in 1usize..64,
        tau in 1e-8f64..1e-5,
    ) {
        let s = deer_signal(&[nu1, nu2], n, tau);
        prop_assert!((0.0..=1.0).contains(&s));
        let flipped = deer_signal(&[-nu1, nu2], n, tau);
        prop_assert!((s - flipped).abs() < 1e-12);
    }

    #[test]
    fn relaxation_population_stays_in_band(
        t in 0.0f64..10.0,
        gp in 0.0f64..1e3,
        gm in 0.0f64..1e3,
    ) {
        let p = relaxometry_population(t, gp, gm).unwrap();
        prop_assert!(p <= 1.0 + 1e-12);
        prop_assert!(p >= 1.0 / 3.0 - 1e-12);
    }

    #[test]
    fn polarized_sensitivity_round_trip(
        t_accu in 1e-6f64..1e-2,
        t_ir_frac in 0.0f64..3.0,
        xi in 0.05f64..1.0,
        f_read in 0.01f64..1.0,
        f_ini in 0.1f64..1.0,
    ) {
        let consts = PhysicalConstants::default();
        let b = SensitivityBudget {
            t_accu,
            t_ini: 0.5 * t_ir_frac * t_accu,
            t_read: 0.5 * t_ir_frac * t_accu,
            xi,
            f_read,
            f_ini,
            distance: 5e-9,
            gamma_target: consts.gamma_e,
            polarization: 1.0,
        };
        let eta = magnetic_sensitivity(&b, SensingMode::Polarization, &consts).unwrap();
        let product = eta * consts.gamma_nv.abs() * t_accu.sqrt() * xi * f_read * f_ini
            / (1.0 + b.t_ir() / t_accu).sqrt();
        prop_assert!((product - 1.0).abs() < 1e-10);
    }
}
