use proptest::prelude::*;

use duomech::hilbert::{build_h_polaron, build_h_probe, HilbertSpec};
use duomech::lindblad::{oms_dissipators, polaron_dissipators, Frame, SectorOptions, SectorSolver};
use duomech::model::{
    commutator_identities, critical_g1, derive, diagonalization_residual, kerr_eigenvalue, polariton_frequencies,
    SystemParams, ThetaBranch,
};
use duomech::observables::{g2_zero, spectrum, Grid, ProbeSetup};
use duomech::oracle::{block_spectrum, dense_steady_state, symplectic_eigen};
use duomech::verify::basis_at;

fn in_region() -> impl Strategy<Value = (f64, f64)> {
    (1.1..2.0f64, 0.01..0.9f64).prop_map(|(d, f)| (d, f * critical_g1(d, 1.0)))
}

fn params_at(delta1: f64, g1: f64, g2: f64) -> SystemParams {
    let base = SystemParams::default();
    SystemParams {
        delta1: delta1 + 2.0 * base.g1 * base.beta,
        g1_override: Some(g1),
        g2,
        ..base
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bogoliubov_factors_are_canonical((d, g) in in_region()) {
        let b = basis_at(d, g, ThetaBranch::Consistent).unwrap();
        prop_assert!(commutator_identities(&b.factors, b.theta).max() < 1e-12);
        prop_assert!(diagonalization_residual(d, 1.0, g, &b) < 1e-8);
        prop_assert!(b.theta > 0.0 && b.theta < std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn frequencies_match_symplectic_eigenvalues((d, g) in in_region()) {
        let (wm, wp) = polariton_frequencies(d, 1.0, g).unwrap();
        let o = symplectic_eigen(d, 1.0, g).unwrap();
        prop_assert!(0.0 < wm && wm <= wp);
        prop_assert!(((wm - o.omega_minus) / o.omega_minus).abs() < 1e-10);
        prop_assert!(((wp - o.omega_plus) / o.omega_plus).abs() < 1e-10);
    }

    #[test]
    fn effective_rates_below_cavity_rate(d in 1.1..1.5f64, f in 0.01..0.9f64) {
        let b = basis_at(d, f * critical_g1(d, 1.0), ThetaBranch::Consistent).unwrap();
        let kappa = SystemParams::default().kappa;
        prop_assert!(b.kappa_minus < kappa && b.kappa_plus < kappa);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sector_solver_matches_dense_oracle(
        (d, g) in in_region(),
        g2 in 0.0..0.004f64,
        x in -2.0..1.0f64,
        polaron in any::<bool>(),
    ) {
        let p = params_at(d, g, g2);
        let basis = derive(&p, ThetaBranch::Consistent).unwrap().basis;
        let spec = HilbertSpec::new(3, 3, 4).unwrap();
        let eps = p.kappa / 20.0;
        let delta = x * basis.omega_minus;
        let (h, diss, frame) = if polaron {
            (build_h_polaron(&basis, delta, eps, &spec), polaron_dissipators(&basis, p.kappa, &spec), Frame::Polaron)
        } else {
            (build_h_probe(&basis, delta, eps, &spec), oms_dissipators(&basis, p.kappa, &spec), Frame::Bare)
        };
        let pairs: Vec<_> = diss.into_iter().map(|d| (d.op, d.rate)).collect();
        let dense = dense_steady_state(&h, &pairs).unwrap();
        let solver = SectorSolver::with_frame(&basis, p.kappa, spec, frame).unwrap();
        let rho = solver.solve(delta, eps, &SectorOptions::default()).unwrap().to_density().unwrap();
        let diff = (dense.matrix() - rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-8, "max difference {diff:e}");
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.hermiticity_error() < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-10);
    }
}

#[test]
fn kerr_ladder_matches_one_and_two_photon_blocks() {
    let p = params_at(1.5, 0.5, 0.003);
    let basis = derive(&p, ThetaBranch::Consistent).unwrap().basis;
    let spec = HilbertSpec::new(3, 16, 24).unwrap();
    let delta = 0.2;
    let h = build_h_probe(&basis, delta, 0.0, &spec);
    for n in 0..3 {
        let low = block_spectrum(&h, &spec, n).unwrap()[0];
        let expect = kerr_eigenvalue(
            n as u32,
            0,
            0,
            delta,
            (basis.g_plus, basis.g_minus),
            (basis.omega_plus, basis.omega_minus),
        );
        assert!((low - expect).abs() < 1e-6, "n={n}: {low} vs {expect}");
    }
}

#[test]
fn decoupled_observables_do_not_depend_on_probe_strength() {
    let p = SystemParams {
        g2: 0.0,
        ..SystemParams::default()
    };
    let spec = HilbertSpec::new(8, 2, 2).unwrap();
    let grid = Grid::linspace(-2.0, 1.0, 7);
    let weak = ProbeSetup::new(p, spec, p.kappa / 40.0, grid.clone());
    let strong = ProbeSetup::new(p, spec, p.kappa / 20.0, grid);
    for run in [spectrum, g2_zero] {
        let a = run(&weak).unwrap();
        let b = run(&strong).unwrap();
        for ((_, ya), (_, yb)) in a.points.iter().zip(&b.points) {
            assert!((ya - yb).abs() < 1e-8, "{ya} vs {yb}");
        }
    }
}

#[test]
fn identical_inputs_give_identical_sweeps() {
    let p = SystemParams::default();
    let setup = ProbeSetup::new(p, HilbertSpec::new(3, 3, 5).unwrap(), p.kappa / 20.0, Grid::linspace(-1.5, 0.5, 9));
    let a = g2_zero(&setup).unwrap();
    let b = g2_zero(&setup).unwrap();
    assert_eq!(a.meta, b.meta);
    assert_eq!(a.to_csv(), b.to_csv());
}
