//! Properties of converged benchmark solutions that go beyond the raw
//! boundary conditions: Hamiltonian behavior, throttle/switching consistency
//! and first-order sensitivity checks.

use mintraj::bench::{self, load_benchmark, ProblemId};
use mintraj::numerics::RootSolveConfig;
use mintraj::shooting::{self, Backend, ContinuationSchedule};
use mintraj::smoothing::{self, SmoothingConfig, SmoothingKind};

fn e2m_solution() -> (shooting::ShootingProblem, shooting::SolveReport) {
    let problem = load_benchmark(
        ProblemId::EarthToMars,
        Backend::Cartesian,
        SmoothingKind::L2Norm,
        true,
    )
    .unwrap();
    let guess = bench::trial_guess(7, 0, Backend::Cartesian);
    let report = shooting::solve_with_continuation(
        &problem,
        &guess,
        &ContinuationSchedule::default(),
        &RootSolveConfig::default(),
    )
    .unwrap();
    assert!(report.converged);
    (problem, report)
}

#[test]
fn converged_e2m_solution_time_series() {
    let (problem, report) = e2m_solution();
    let samples = shooting::sample_solution(&problem, &report.eta0_solution, 1e-5, 2000).unwrap();
    assert_eq!(samples.len(), 2000);

    // Departure happens under thrust.
    assert!(samples[0].s > 0.0, "S(t0) = {}", samples[0].s);

    // Throttle is definitionally tied to the switching function at every
    // sample, and mass never increases.
    let cfg = SmoothingConfig::new(SmoothingKind::L2Norm, 1e-5).unwrap();
    let mut prev_m = f64::INFINITY;
    for s in &samples {
        assert_eq!(s.delta, smoothing::throttle(s.s, &cfg));
        assert!(s.m <= prev_m + 1e-15);
        prev_m = s.m;
    }

    // The Hamiltonian of the autonomous system stays flat along the
    // converged extremal.
    let h0 = samples[0].hamiltonian;
    let drift = samples
        .iter()
        .map(|s| (s.hamiltonian - h0).abs())
        .fold(0.0f64, f64::max)
        / h0.abs().max(1.0);
    assert!(drift < 1e-4, "Hamiltonian drift {drift}");
}

#[test]
fn converged_e2m_jacobian_predicts_residual_shift() {
    let (problem, report) = e2m_solution();
    let eta = report.eta0_solution;
    let rho = 1e-5;
    let jac = shooting::residual_jacobian(&problem, &eta, rho).unwrap();
    let base = shooting::residual(&problem, &eta, rho).unwrap();
    let step = 1e-6;
    for dir in [0usize, 3, 6] {
        let mut eta2 = eta;
        eta2[dir] += step;
        let psi = shooting::residual(&problem, &eta2, rho).unwrap();
        for i in 0..7 {
            let predicted = base[i] + jac[(i, dir)] * step;
            let scale = jac.column(dir).abs().max() * step;
            assert!(
                (psi[i] - predicted).abs() <= 1e-2 * scale + 1e-10,
                "dir {dir} row {i}: {} vs {predicted}",
                psi[i]
            );
        }
    }
}

#[test]
fn lam_m_nonincreasing_along_converged_solution() {
    let (problem, report) = e2m_solution();
    let samples = shooting::sample_solution(&problem, &report.eta0_solution, 1e-5, 500).unwrap();
    let mut prev = f64::INFINITY;
    for s in &samples {
        assert!(s.lam_m <= prev + 1e-12);
        prev = s.lam_m;
    }
    // Transversality at the end, non-negative at departure.
    assert!(samples[0].lam_m >= 0.0);
    assert!(samples.last().unwrap().lam_m.abs() < 1e-8);
}
