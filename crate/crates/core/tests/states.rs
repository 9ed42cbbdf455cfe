mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use otto_probe::fock::{
    moments, squeeze, thermal_occupation, thermal_state, GaussianMoments, RadialState, SqueezeSpec,
};
use otto_probe::params::{derive_params, TrapConfig};
use proptest::prelude::*;

#[test]
fn gamma_for_reference_geometry() {
    let d = derive_params(&TrapConfig::reference()).unwrap();
    assert_relative_eq!(d.gamma, 577.350_269_189_625_7, max_relative = 1e-12);
    assert_relative_eq!(d.kappa, 10.0, max_relative = 1e-12);
}

#[test]
fn lab_units_match_reference() {
    let a = TrapConfig::from_lab_units(40.0, 1e6, 1e5, 30.0, 1e-3).unwrap();
    let b = TrapConfig::reference();
    assert_relative_eq!(
        a.taper_angle_theta,
        b.taper_angle_theta,
        max_relative = 1e-14
    );
    assert_eq!(a.mass, b.mass);
}

#[test]
fn zero_angle_is_rejected() {
    assert!(TrapConfig::from_lab_units(40.0, 1e6, 1e5, 0.0, 1e-3).is_err());
}

#[test]
fn bose_occupation_examples() {
    let n = thermal_occupation(1.2e-3, 2.0 * PI * 1e6);
    assert!((n - 24.5).abs() < 0.05, "{n}");
    let n = thermal_occupation(1e-3, 2.0 * PI * 1e5);
    assert!((205.0..=212.0).contains(&n), "{n}");
}

#[test]
fn squeezed_vacuum_moments() {
    let vac = RadialState::fock(0, 64).unwrap();
    let m = moments(&squeeze(&vac, &SqueezeSpec::new(0.5, 0.0).unwrap()).unwrap());
    assert_relative_eq!(m.n, 0.5_f64.sinh().powi(2), max_relative = 1e-9);
    assert_relative_eq!(m.x, -1.0_f64.sinh(), max_relative = 1e-9);
    assert!(m.y.abs() < 1e-12);
    assert_relative_eq!(m.r_value(), (-1.0_f64).exp(), max_relative = 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derive_params_scales_with_r0(r0 in 1e-4..1e-2f64, theta in 0.01..1.2f64) {
        let mut cfg = TrapConfig::reference();
        cfg.r0 = r0;
        cfg.taper_angle_theta = theta;
        let a = derive_params(&cfg).unwrap();
        cfg.r0 = 2.0 * r0;
        let b = derive_params(&cfg).unwrap();
        prop_assert!((a.gamma - 2.0 * b.gamma).abs() <= 1e-12 * a.gamma);
    }

    #[test]
    fn thermal_states_are_valid(n_th in 0.0..6.0f64) {
        let dim = otto_probe::fock::auto_dim(n_th, 0.0);
        let s = thermal_state(n_th, dim).unwrap();
        s.check_invariants().unwrap();
        let m = moments(&s);
        prop_assert_eq!(m.x, 0.0);
        prop_assert_eq!(m.y, 0.0);
        // the discarded tail shifts the mean by at most dim times the tail limit
        prop_assert!((m.n - n_th).abs() < 1e-8 * (dim as f64) * (1.0 + n_th));
    }

    #[test]
    fn squeeze_is_undone_by_opposite_phase(
        n_th in 0.0..1.5f64, r in 0.0..0.8f64, alpha in 0.0..(2.0 * PI)
    ) {
        let dim = otto_probe::fock::auto_dim(n_th, r);
        let s = thermal_state(n_th, dim).unwrap();
        let fwd = squeeze(&s, &SqueezeSpec::new(r, alpha).unwrap()).unwrap();
        fwd.check_invariants().unwrap();
        let back = squeeze(&fwd, &SqueezeSpec::new(r, alpha + PI).unwrap()).unwrap();
        prop_assert!(back.trace_distance(&s) < 1e-8);
    }

    #[test]
    fn squeezing_preserves_moment_invariant(
        n_th in 0.0..2.0f64, r in 0.0..0.8f64, alpha in 0.0..(2.0 * PI)
    ) {
        let dim = otto_probe::fock::auto_dim(n_th, r);
        let s = squeeze(&thermal_state(n_th, dim).unwrap(), &SqueezeSpec::new(r, alpha).unwrap()).unwrap();
        let m = moments(&s);
        let want = (2.0 * n_th + 1.0).powi(2);
        prop_assert!((m.uncertainty_invariant() - want).abs() < 1e-6 * want);
        let closed = GaussianMoments::squeezed_thermal(n_th, &SqueezeSpec::new(r, alpha).unwrap());
        prop_assert!((closed.r_value() - m.r_value()).abs() < 1e-7 * (2.0 * n_th + 1.0) * (2.0 * r).exp());
    }

    #[test]
    fn quadrature_never_below_squeezed_bound(
        n_th in 0.0..50.0f64, r in 0.0..2.0f64, alpha in 0.0..(2.0 * PI)
    ) {
        let m = GaussianMoments::squeezed_thermal(n_th, &SqueezeSpec::new(r, alpha).unwrap());
        let bound = (-2.0 * r).exp() * (2.0 * n_th + 1.0);
        prop_assert!(m.r_value() >= bound * (1.0 - 1e-12));
    }

    #[test]
    fn random_states_pass_invariants(dim in 2usize..24, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let s = common::random_state(dim, 1 + (seed as usize % dim), &mut rng);
        prop_assert!((s.trace() - 1.0).abs() < 1e-12);
        prop_assert!(s.hermiticity_error() < 1e-12);
        prop_assert!(s.min_eigenvalue() > -1e-12);
    }
}

#[test]
fn squeeze_alpha_zero_minimizes_r() {
    let worst = (0..64)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 64.0;
            GaussianMoments::squeezed_thermal(2.0, &SqueezeSpec::new(1.0, a).unwrap()).r_value()
        })
        .fold(f64::INFINITY, f64::min);
    let at_zero =
        GaussianMoments::squeezed_thermal(2.0, &SqueezeSpec::new(1.0, 0.0).unwrap()).r_value();
    assert_relative_eq!(worst, at_zero, max_relative = 1e-12);
    assert_relative_eq!(at_zero, 5.0 * (-2.0_f64).exp(), max_relative = 1e-12);
}

#[test]
fn json_export_round_trips_populations() {
    let s = thermal_state(1.0, 40).unwrap();
    let v = s.to_json(1e-14);
    assert_eq!(v.as_array().unwrap().len(), 40);
    assert_eq!(v[3][0], 3);
    let entries = s.export_entries(1e-14);
    assert!(entries.iter().all(|e| e[0] == e[1] && e[3] == 0.0));
    let pops = s.populations();
    for e in &entries {
        assert_eq!(e[2], pops[e[0] as usize]);
    }
}
