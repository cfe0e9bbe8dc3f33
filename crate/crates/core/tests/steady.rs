mod support;

use std::sync::Arc;

use nsp_core::domain::RadialGrid;
use nsp_core::error::NspError;
use nsp_core::steady::{
    check_subsuper, make_profile, solve_steady_monotone, steady_regularity_report,
    supersolution_phi, ProfileKind, Role, CERT_TOL,
};
use support::oracles::{density, newton_steady};

fn grid(r_max: f64, n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(1.0, r_max, n, 0.0).unwrap())
}

#[test]
fn monotone_limit_agrees_with_newton() {
    let g = grid(16.0, 600);
    let tol = 1e-10;
    for gamma in [1.0, 1.4, 2.0] {
        for amp in [0.3, 1.0] {
            let p = make_profile(ProfileKind::AdmissibleBump, 1.0, amp, &g).unwrap();
            let s = solve_steady_monotone(gamma, &p, tol).unwrap();
            let oracle = newton_steady(g.nodes(), p.values.values(), gamma, 1.0);
            let diff = s
                .phi_tilde
                .values()
                .iter()
                .zip(&oracle)
                .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(diff < 10.0 * tol, "gamma {gamma} amp {amp}: {diff}");
            for (&rho, &phi) in s.rho_tilde.values().iter().zip(s.phi_tilde.values()) {
                assert!((rho - density(gamma, 1.0, phi)).abs() < 1e-12 * rho);
            }
        }
    }
}

#[test]
fn bump_solution_lies_between_bounds() {
    let g = grid(16.0, 400);
    for gamma in [1.0, 1.5, 2.0] {
        let p = make_profile(ProfileKind::AdmissibleBump, 1.0, 1.0, &g).unwrap();
        let s = solve_steady_monotone(gamma, &p, 1e-10).unwrap();
        assert!(s.bounds_ok, "gamma {gamma}: {}", s.bounds_violation);
        for (&r, &rho) in g.nodes().iter().zip(s.rho_tilde.values()) {
            assert!(rho >= 1.0 - 1e-12 && rho <= 1.0 + 1.0 / r + 1e-12);
        }
        assert!(s.super_cert.passed && s.sub_cert.passed);
        assert!(s.limit_gap < 1e-8);
    }
}

#[test]
fn explicit_pair_certificates() {
    let g = grid(16.0, 400);
    let p = make_profile(ProfileKind::AdmissibleBump, 1.0, 1.0, &g).unwrap();
    for gamma in [1.0, 1.25, 2.0] {
        let sup = supersolution_phi(gamma, 1.0, &g).unwrap();
        let cert = check_subsuper(&sup, Role::Super, gamma, &p, CERT_TOL).unwrap();
        assert!(cert.passed, "{cert:?}");
        // the supersolution is not a subsolution for a nonconstant profile
        let wrong = check_subsuper(&sup, Role::Sub, gamma, &p, CERT_TOL).unwrap();
        assert!(!wrong.passed);
    }
}

#[test]
fn gamma_near_one_approaches_isothermal() {
    let g = grid(16.0, 300);
    let p = make_profile(ProfileKind::AdmissibleBump, 1.0, 1.0, &g).unwrap();
    let a = solve_steady_monotone(1.01, &p, 1e-10).unwrap();
    let b = solve_steady_monotone(1.0, &p, 1e-10).unwrap();
    for (x, y) in a.phi_tilde.values().iter().zip(b.phi_tilde.values()) {
        assert!((x - y).abs() <= 0.05 * y.abs() + 1e-12);
    }
}

#[test]
fn envelope_profile_above_two() {
    let g = grid(16.0, 400);
    let kind = ProfileKind::GeneralGammaEnvelope {
        gamma: 3.0,
        c0: 0.5,
        epsilon: 0.5,
    };
    let p = make_profile(kind, 1.0, 1.0, &g).unwrap();
    let s = solve_steady_monotone(3.0, &p, 1e-10).unwrap();
    assert!(s.bounds_ok && s.super_cert.passed && s.sub_cert.passed);
    let bump = make_profile(ProfileKind::AdmissibleBump, 1.0, 1.0, &g).unwrap();
    assert!(matches!(
        solve_steady_monotone(3.0, &bump, 1e-10),
        Err(NspError::Parameter(_))
    ));
}

#[test]
fn regularity_report_is_stable() {
    let g = grid(16.0, 200);
    let p = make_profile(ProfileKind::AdmissibleBump, 1.0, 1.0, &g).unwrap();
    let s = solve_steady_monotone(2.0, &p, 1e-10).unwrap();
    let rep = steady_regularity_report(&s).unwrap();
    assert!(rep.stable_under_refinement && rep.stable_under_extension);
    assert!(rep.compatibility_residual < 1e-2 * rep.norms.phi[1]);
}

#[test]
fn inadmissible_amplitude_rejected() {
    let g = grid(16.0, 50);
    assert!(matches!(
        make_profile(ProfileKind::AdmissibleBump, 1.0, 1.5, &g),
        Err(NspError::Parameter(_))
    ));
}
