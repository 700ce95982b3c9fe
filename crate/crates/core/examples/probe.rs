use mintraj::bench::{load_benchmark, trial_guess, ProblemId};
use mintraj::numerics::RootSolveConfig;
use mintraj::shooting::{self, Backend, ContinuationSchedule};
use mintraj::smoothing::SmoothingKind;

fn main() {
    let problem = load_benchmark(
        ProblemId::EarthToDionysus,
        Backend::Cartesian,
        SmoothingKind::L2Norm,
        true,
    )
    .unwrap();
    for seed in 0..14u64 {
        let guess = trial_guess(seed, 0, Backend::Cartesian);
        let rep = shooting::solve_with_continuation(
            &problem,
            &guess,
            &ContinuationSchedule::default(),
            &RootSolveConfig::default(),
        )
        .unwrap();
        if rep.converged {
            let samples =
                shooting::sample_solution(&problem, &rep.eta0_solution, 1e-5, 400).unwrap();
            let revs = shooting::revolutions_from_samples(&samples);
            println!(
                "seed {seed}: mass {:.3} kg, revs {revs}",
                rep.final_mass_kg
            );
        } else {
            println!("seed {seed}: failed");
        }
    }
}
