//! Acceptance run: one PASS/FAIL line per criterion, all criteria required.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::fs;
use std::sync::Arc;
use std::time::Instant;

use nsp_cli::commands::{cmd_simulate, cmd_steady, cmd_verify_inequalities};
use nsp_cli::parse_config;
use nsp_core::domain::{weighted_l2_norm, RadialField, RadialGrid};
use nsp_core::energy::EnergySample;
use nsp_core::evolve::{run_simulation, Physics, SimConfig, TimeSeries, TimeStep};
use nsp_core::ineqlab::{manufactured_poisson_error, run_lab, LabConfig, LabReport};
use nsp_core::steady::{
    check_subsuper, make_profile, solve_steady_monotone, supersolution_phi, BackgroundProfile,
    ProfileKind, Role, SteadyState,
};
use nsp_core::FluidParams;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(r_max: f64, n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(1.0, r_max, n, 0.0).unwrap())
}

fn steady(gamma: f64, amp: f64, r_max: f64, n: usize) -> SteadyState {
    let g = grid(r_max, n);
    let p = make_profile(ProfileKind::AdmissibleBump, 1.0, amp, &g).unwrap();
    solve_steady_monotone(gamma, &p, 1e-10).unwrap()
}

fn steady_bounds() -> Outcome {
    let mut worst_iter = 0;
    let mut worst_time = 0.0_f64;
    let mut ok = true;
    for gamma in [1.0, 1.5, 2.0] {
        for amp in [0.0, 0.5, 1.0] {
            let t = Instant::now();
            let s = steady(gamma, amp, 16.0, 2000);
            worst_time = worst_time.max(t.elapsed().as_secs_f64());
            worst_iter = worst_iter.max(s.iterations_from_super.max(s.iterations_from_sub));
            for (&r, &rho) in s.grid().nodes().iter().zip(s.rho_tilde.values()) {
                ok &= rho >= 1.0 - 1e-8 && rho <= 1.0 + 1.0 / r + 1e-8;
            }
        }
    }
    ok &= worst_iter <= 200 && worst_time < 5.0;
    outcome(
        ok,
        format!("9 cases, max iterations {worst_iter}, slowest {worst_time:.2} s"),
    )
}

fn certificates() -> Outcome {
    let g = grid(16.0, 2000);
    let values = RadialField::from_fn(Arc::clone(&g), |r| 1.0 + 1.0 / r).unwrap();
    let profile = BackgroundProfile {
        kind: ProfileKind::AdmissibleBump,
        c_star: 1.0,
        amplitude: 1.0,
        values,
    };
    let phi2 = supersolution_phi(2.0, 1.0, &g).unwrap();
    let c2 = check_subsuper(&phi2, Role::Super, 2.0, &profile, 1e-10).unwrap();
    let interior = c2.max_residual.abs().max(c2.min_residual.abs());
    let slope_err = (c2.normal_derivative - 2.0).abs();
    let phi4 = supersolution_phi(1.0, 1.0, &g).unwrap();
    let c4 = check_subsuper(&phi4, Role::Super, 1.0, &profile, 1e-8).unwrap();
    let ok = interior < 1e-10 && c2.normal_derivative > 0.0 && slope_err < 1e-3 && c4.passed;
    outcome(
        ok,
        format!(
            "gamma=2 |residual| {interior:.2e}, -dPhi/dr(R) {:.6}; gamma=1 max residual {:.2e}",
            c2.normal_derivative, c4.max_residual
        ),
    )
}

fn newton_agreement() -> Outcome {
    let s = steady(2.0, 0.5, 16.0, 2000);
    let oracle = oracles::newton_steady(s.grid().nodes(), s.profile.values.values(), 2.0, 1.0);
    let diff = s
        .phi_tilde
        .values()
        .iter()
        .zip(&oracle)
        .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    outcome(
        diff < 1e-9,
        format!("max |Phi_monotone - Phi_newton| = {diff:.2e}"),
    )
}

fn spatial_convergence() -> Outcome {
    let t = Instant::now();
    let levels = [400, 800, 1600];
    let res: Vec<f64> = levels
        .iter()
        .map(|&n| steady(2.0, 0.5, 16.0, n).residual_elliptic)
        .collect();
    let man: Vec<f64> = levels
        .iter()
        .map(|&n| manufactured_poisson_error(1.0, 16.0, n).unwrap())
        .collect();
    let ratios: Vec<f64> = res
        .windows(2)
        .chain(man.windows(2))
        .map(|w| w[0] / w[1])
        .collect();
    let secs = t.elapsed().as_secs_f64();
    let ok = ratios.iter().all(|r| (3.5..=4.5).contains(r)) && secs < 30.0;
    outcome(ok, format!("ratios {ratios:.3?} in {secs:.1} s"))
}

fn simulate(
    gamma: f64,
    r_max: f64,
    n: usize,
    delta: f64,
    physics: Physics,
    dt: TimeStep,
    t_end: f64,
    stride: usize,
) -> (TimeSeries, f64) {
    let s = Arc::new(steady(gamma, 0.5, r_max, n));
    let mut cfg = SimConfig::new(
        FluidParams {
            gamma,
            ..FluidParams::default()
        },
        s,
    );
    cfg.delta = delta;
    cfg.physics = physics;
    cfg.dt = dt;
    cfg.t_end = t_end;
    cfg.output_stride = stride;
    let mut q0 = 0.0;
    let ts = run_simulation(&cfg, |step, st| {
        if step == 0 {
            q0 = weighted_l2_norm(&st.q);
        }
        Ok(())
    })
    .unwrap();
    (ts, q0)
}

fn equilibrium() -> Outcome {
    let (ts, _) = simulate(
        2.0,
        16.0,
        2000,
        0.0,
        Physics::default(),
        TimeStep::Auto,
        10.0,
        50,
    );
    let sup = ts.samples.iter().map(|s| s.e).fold(0.0, f64::max);
    outcome(
        ts.failure.is_none() && sup < 1e-9,
        format!("sup E = {sup:.2e} over [0, 10]"),
    )
}

struct StabilityRun {
    ts: TimeSeries,
    q0: f64,
    secs: f64,
}

fn stability_run(r_max: f64) -> StabilityRun {
    // the doubled shell keeps the spacing of the 2000-cell grid on [1, 16]
    let n = (2000.0 * (r_max - 1.0) / 15.0).round() as usize;
    let t = Instant::now();
    let (ts, q0) = simulate(
        2.0,
        r_max,
        n,
        1e-3,
        Physics::default(),
        TimeStep::Auto,
        10.0,
        10,
    );
    StabilityRun {
        ts,
        q0,
        secs: t.elapsed().as_secs_f64(),
    }
}

fn stability(a: &StabilityRun, b: &StabilityRun) -> Outcome {
    let (Some(va), Some(vb)) = (a.ts.verdict, b.ts.verdict) else {
        return outcome(false, "run aborted".into());
    };
    let change = |x: f64, y: f64| (x - y).abs() / x;
    let ce = change(va.sup_energy_ratio, vb.sup_energy_ratio);
    let cc = change(va.sup_combined_ratio, vb.sup_combined_ratio);
    let ok = va.sup_energy_ratio <= 2.0
        && va.sup_combined_ratio <= 4.0
        && vb.sup_energy_ratio <= 2.0
        && vb.sup_combined_ratio <= 4.0
        && ce < 0.2
        && cc < 0.2
        && a.secs.max(b.secs) < 300.0;
    outcome(
        ok,
        format!(
            "R_max=16: sup E/E0 {:.4}, combined {:.4}; R_max=32: {:.4}, {:.4}; changes {:.1e}, {:.1e}; {:.0} s / {:.0} s",
            va.sup_energy_ratio, va.sup_combined_ratio, vb.sup_energy_ratio, vb.sup_combined_ratio, ce, cc, a.secs, b.secs
        ),
    )
}

fn mass(run: &StabilityRun) -> Outcome {
    let drift = run.ts.max_mass_drift();
    let bound = 1e-10 * run.q0;
    outcome(
        drift <= bound,
        format!("max drift {drift:.2e}, bound {bound:.2e}"),
    )
}

fn linear_physics() -> Physics {
    Physics {
        nonlinear: false,
        ..Physics::default()
    }
}

fn remainder(delta: f64, dt: f64) -> f64 {
    let run = |p| {
        simulate(2.0, 16.0, 400, delta, p, TimeStep::Fixed(dt), 2.0, 1)
            .0
            .samples
    };
    let nl = run(Physics::default());
    let lin = run(linear_physics());
    nl.iter()
        .zip(&lin)
        .map(|(a, b): (&EnergySample, &EnergySample)| {
            (a.identity_residual - b.identity_residual).abs()
        })
        .fold(0.0, f64::max)
}

fn energy_identity() -> Outcome {
    let dt = 9.5e-4;
    let (ts, _) = simulate(
        2.0,
        16.0,
        2000,
        1e-3,
        linear_physics(),
        TimeStep::Fixed(dt),
        2.0,
        1,
    );
    let h = ts.samples.first().map(|_| 15.0 / 2000.0).unwrap();
    let scale = ts
        .samples
        .iter()
        .map(|s| s.viscous_dissipation + s.sponge_dissipation)
        .fold(0.0, f64::max);
    let tol = 5.0 * (h * h + dt * dt) * scale;
    let worst = ts
        .samples
        .iter()
        .map(|s| s.identity_residual.abs())
        .fold(0.0, f64::max);
    let (r1, r2) = (remainder(1e-4, 2e-3), remainder(1e-3, 2e-3));
    let slope = (r2 / r1).log10();
    outcome(
        worst <= tol && slope >= 1.5,
        format!(
            "linear worst {worst:.2e} vs tolerance {tol:.2e}; nonlinear remainder slope {slope:.2}"
        ),
    )
}

fn pairing(r: &LabReport) -> Outcome {
    let b = &r.boundary_pairing;
    let fine = b.refined.as_ref();
    let coarse_ok = b.max_ratio <= 1.05 && b.allowance.is_some_and(|a| a <= 0.05);
    let fine_ok =
        fine.is_some_and(|f| f.max_ratio <= 1.02 && f.allowance.is_some_and(|a| a < 0.02));
    outcome(
        coarse_ok && fine_ok,
        format!(
            "max ratio {:.4} (allowance {:.2e}) on 32x16x32, {:.4} (allowance {:.2e}) on 64x32x64",
            b.max_ratio,
            b.allowance.unwrap_or(f64::NAN),
            fine.map_or(f64::NAN, |f| f.max_ratio),
            fine.and_then(|f| f.allowance).unwrap_or(f64::NAN)
        ),
    )
}

fn div_curl(r: &LabReport) -> Outcome {
    let d = &r.div_curl;
    let change = d
        .refined
        .as_ref()
        .map_or(f64::INFINITY, |f| f.relative_change);
    outcome(
        d.max_ratio.is_finite() && change < 0.25,
        format!(
            "max ratio {:.4}, change under refinement {change:.2e}",
            d.max_ratio
        ),
    )
}

fn trace(r: &LabReport) -> Outcome {
    let spread = r
        .trace_scaling
        .details
        .get("max_relative_spread")
        .copied()
        .unwrap_or(f64::INFINITY);
    outcome(
        spread < 0.3,
        format!("max spread over R in {{1, 2, 4}}: {spread:.2e}"),
    )
}

fn regularity(r: &LabReport) -> Outcome {
    let e = &r.elliptic_regularity;
    let change = e
        .regularity
        .refined
        .as_ref()
        .map_or(f64::INFINITY, |f| f.relative_change);
    let order = e.manufactured.order;
    outcome(
        e.regularity.max_ratio.is_finite() && change < 0.2 && order > 1.8,
        format!(
            "C_emp {:.4}, change {change:.2e}, manufactured order {order:.3}",
            e.regularity.max_ratio
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = "[domain]\nr_inner = 1\nr_outer = 16\nn_cells = 300\n[evolve]\nt_end = 2\n\
                [ineqlab]\nvector_fields = 10\nscalar_fields = 4\nradial_sources = 10\nseed = 11\n";
    let cfg = parse_config(text).unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        cmd_steady(&cfg, &out).unwrap();
        cmd_simulate(&cfg, &out).unwrap();
        cmd_verify_inequalities(&cfg, &out).unwrap();
        let mut lab: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("inequalities.json")).unwrap())
                .unwrap();
        lab["timestamp"] = serde_json::Value::Null;
        files.push((
            fs::read(out.join("timeseries.csv")).unwrap(),
            fs::read(out.join("rho_tilde.txt")).unwrap(),
            fs::read(out.join("phi_tilde.txt")).unwrap(),
            lab,
        ));
    }
    let same = files[0] == files[1];
    outcome(
        same,
        format!(
            "CSV {} bytes, profiles and report identical: {same}",
            files[0].0.len()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    type Check = Box<dyn Fn() -> Vec<(usize, Outcome)> + Send + Sync>;
    let checks: Vec<Check> = vec![
        Box::new(|| vec![(1, steady_bounds())]),
        Box::new(|| vec![(2, certificates())]),
        Box::new(|| vec![(3, newton_agreement())]),
        Box::new(|| vec![(4, spatial_convergence())]),
        Box::new(|| vec![(5, equilibrium())]),
        Box::new(|| {
            let (a, b) = rayon::join(|| stability_run(16.0), || stability_run(32.0));
            vec![(6, stability(&a, &b)), (7, mass(&a))]
        }),
        Box::new(|| vec![(8, energy_identity())]),
        Box::new(|| {
            let r = run_lab(&LabConfig::default()).unwrap();
            vec![
                (9, pairing(&r)),
                (10, div_curl(&r)),
                (11, trace(&r)),
                (12, regularity(&r)),
            ]
        }),
        Box::new(|| vec![(13, determinism())]),
    ];
    let mut results: Vec<(usize, Outcome)> = checks.par_iter().flat_map(|c| c()).collect();
    results.sort_by_key(|r| r.0);
    let mut failed = Vec::new();
    for (k, o) in &results {
        println!(
            "{} criterion {k:2}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(*k);
        }
    }
    assert_eq!(results.len(), 13);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
