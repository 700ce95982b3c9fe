//! Two-point boundary-value residuals and the continuation driver.
//!
//! The unknowns are the seven initial costates eta0 = [lam_x(t0), lam_m(t0)];
//! the constraints are the six terminal states against the target plus the
//! transversality condition lam_m(tf) = 0. The residual Jacobian comes from
//! the chain rule through the state transition matrix: a constant selection
//! of STM rows (the constrained terminal entries) times a constant injection
//! of STM columns (the free initial costate slots).

use crate::cartesian::{self, CartesianAugState};
use crate::cr3bp::{self, Cr3bpAugState};
use crate::mee::{self, MeeAugState};
use crate::numerics::{
    self, dogleg, IntegratorConfig, JacobianMode, OdeError, RhsError, RootReport, RootSolveConfig,
    StmMatrix, Termination,
};
use crate::smoothing::{SmoothingConfig, SmoothingKind};
use crate::units::{CanonicalParams, CanonicalScale};
use crate::{DynError, AUG_DIM};
use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which dynamics formulation propagates the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Cartesian,
    Mee,
    Cr3bp,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Cartesian => "cartesian",
            Backend::Mee => "mee",
            Backend::Cr3bp => "cr3bp",
        }
    }
}

/// Vector of unknown initial costates (six state costates plus lam_m).
pub type CostateGuess = [f64; 7];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShootingError {
    #[error("invalid shooting problem: {0}")]
    Invalid(&'static str),
    #[error("propagation failed: {0}")]
    Propagation(#[from] OdeError),
    #[error("dynamics error: {0}")]
    Dynamics(#[from] DynError),
}

/// A fully nondimensionalized fixed-time rendezvous problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingProblem {
    pub backend: Backend,
    /// Canonical dynamical parameters (mu is the mass ratio for Cr3bp).
    pub params: CanonicalParams,
    /// Unit scales for redimensionalizing reported quantities.
    pub scale: CanonicalScale,
    /// Known initial state (position/velocity or equinoctial elements).
    pub initial: [f64; 6],
    /// Initial mass in canonical units (1 when the mass unit is m0).
    pub m0: f64,
    /// Terminal constraint; for the Mee backend the stored longitude already
    /// carries the 2 pi N_rev revolution offset.
    pub target: [f64; 6],
    /// Time of flight, TU.
    pub tof: f64,
    pub smoothing_kind: SmoothingKind,
    /// Use the state-transition-matrix Jacobian (otherwise finite differences).
    pub use_stm: bool,
    pub integrator: IntegratorConfig,
}

impl ShootingProblem {
    pub fn validate(&self) -> Result<(), ShootingError> {
        if !(self.tof > 0.0) {
            return Err(ShootingError::Invalid("time of flight must be positive"));
        }
        if !(self.m0 > 0.0) {
            return Err(ShootingError::Invalid("initial mass must be positive"));
        }
        if self.backend == Backend::Mee && (self.params.mu - 1.0).abs() > 1e-12 {
            return Err(ShootingError::Invalid(
                "equinoctial dynamics assume the mu = 1 canonical scale",
            ));
        }
        Ok(())
    }

    /// Assemble the full augmented initial state from the costate guess.
    pub fn initial_state(&self, eta0: &CostateGuess) -> [f64; AUG_DIM] {
        let mut z = [0.0; AUG_DIM];
        z[..6].copy_from_slice(&self.initial);
        z[6] = self.m0;
        z[7..14].copy_from_slice(eta0);
        z
    }

    fn smoothing(&self, rho: f64) -> SmoothingConfig {
        SmoothingConfig {
            kind: self.smoothing_kind,
            rho,
        }
    }

    fn eval_rhs(&self, rho: f64, z: &[f64; AUG_DIM]) -> Result<[f64; AUG_DIM], RhsError> {
        let cfg = self.smoothing(rho);
        let res = match self.backend {
            Backend::Cartesian => {
                cartesian::rhs(&CartesianAugState::from_array(z), &self.params, &cfg)
            }
            Backend::Mee => mee::mee_rhs(&MeeAugState::from_array(z), &self.params, &cfg),
            Backend::Cr3bp => cr3bp::cr3bp_rhs(&Cr3bpAugState::from_array(z), &self.params, &cfg),
        };
        res.map_err(dyn_to_rhs)
    }

    fn eval_jacobian(&self, rho: f64, z: &[f64; AUG_DIM]) -> Result<StmMatrix, RhsError> {
        let cfg = self.smoothing(rho);
        let res = match self.backend {
            Backend::Cartesian => {
                cartesian::rhs_jacobian(&CartesianAugState::from_array(z), &self.params, &cfg)
            }
            Backend::Mee => mee::mee_rhs_jacobian(&MeeAugState::from_array(z), &self.params, &cfg),
            Backend::Cr3bp => {
                cr3bp::cr3bp_rhs_jacobian(&Cr3bpAugState::from_array(z), &self.params, &cfg)
            }
        };
        res.map_err(dyn_to_rhs)
    }
}

fn dyn_to_rhs(e: DynError) -> RhsError {
    RhsError::new(match e {
        DynError::SingularRadius(m) | DynError::InvalidState(m) => m,
        DynError::DegenerateCostate => "degenerate costate",
    })
}

/// Propagate the augmented state to tf.
pub fn propagate(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
) -> Result<[f64; AUG_DIM], ShootingError> {
    problem.validate()?;
    let z0 = problem.initial_state(eta0);
    let zf = numerics::integrate(
        |_t, y, dy| {
            let z: &[f64; AUG_DIM] = y.try_into().expect("aug dim");
            let dz = problem.eval_rhs(rho, z)?;
            dy.copy_from_slice(&dz);
            Ok(())
        },
        &z0,
        0.0,
        problem.tof,
        &problem.integrator,
    )?;
    let mut out = [0.0; AUG_DIM];
    out.copy_from_slice(&zf);
    Ok(out)
}

/// Propagate state and state transition matrix together.
pub fn propagate_with_stm(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
) -> Result<([f64; AUG_DIM], StmMatrix), ShootingError> {
    problem.validate()?;
    let z0 = problem.initial_state(eta0);
    Ok(numerics::integrate_with_stm(
        |_t, z| problem.eval_rhs(rho, z),
        |_t, z| problem.eval_jacobian(rho, z),
        &z0,
        0.0,
        problem.tof,
        &problem.integrator,
    )?)
}

fn residual_from_terminal(problem: &ShootingProblem, zf: &[f64; AUG_DIM]) -> [f64; 7] {
    let mut psi = [0.0; 7];
    for i in 0..6 {
        psi[i] = zf[i] - problem.target[i];
    }
    psi[6] = zf[13];
    psi
}

/// Shooting residual psi(eta0; rho): terminal constraint violations plus the
/// transversality value lam_m(tf).
pub fn residual(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
) -> Result<[f64; 7], ShootingError> {
    let zf = propagate(problem, eta0, rho)?;
    Ok(residual_from_terminal(problem, &zf))
}

/// STM rows of the constrained terminal entries (six states and lam_m).
const PSI_ROWS: [usize; 7] = [0, 1, 2, 3, 4, 5, 13];
/// STM columns of the free initial entries (the seven costate slots).
const ETA_COLS: [usize; 7] = [7, 8, 9, 10, 11, 12, 13];

/// Jacobian d(psi)/d(eta0) assembled from the STM by the chain rule.
pub fn residual_jacobian(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
) -> Result<SMatrix<f64, 7, 7>, ShootingError> {
    let (_, phi) = propagate_with_stm(problem, eta0, rho)?;
    Ok(SMatrix::from_fn(|i, j| phi[(PSI_ROWS[i], ETA_COLS[j])]))
}

/// The rho ladder driven by [`solve_with_continuation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub rho_init: f64,
    pub rho_factor: f64,
    pub rho_final: f64,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            rho_init: 1.0,
            rho_factor: 0.1,
            rho_final: 1e-5,
        }
    }
}

impl ContinuationSchedule {
    pub fn validate(&self) -> Result<(), ShootingError> {
        if !(self.rho_final > 0.0 && self.rho_final <= self.rho_init) {
            return Err(ShootingError::Invalid("need 0 < rho_final <= rho_init"));
        }
        if !(self.rho_factor > 0.0 && self.rho_factor < 1.0) {
            return Err(ShootingError::Invalid("need 0 < rho_factor < 1"));
        }
        Ok(())
    }

    /// The decreasing sequence of smoothing parameters, ending exactly at
    /// rho_final.
    pub fn ladder(&self) -> Vec<f64> {
        let mut rhos = Vec::new();
        let mut rho = self.rho_init;
        loop {
            if rho <= self.rho_final * (1.0 + 1e-9) {
                rhos.push(self.rho_final);
                return rhos;
            }
            rhos.push(rho);
            rho *= self.rho_factor;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub rho: f64,
    pub iterations: usize,
    pub residual_evals: usize,
    pub jacobian_evals: usize,
    pub residual_inf_norm: f64,
    pub converged: bool,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub eta0_solution: CostateGuess,
    /// Final spacecraft mass in kg, NaN when not converged.
    pub final_mass_kg: f64,
    pub stages: Vec<StageReport>,
    /// Index of the first failing stage, if any.
    pub failed_stage: Option<usize>,
    pub wall_time_s: f64,
}

/// Solve one shooting problem at fixed rho.
pub fn solve_stage(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
    root_cfg: &RootSolveConfig,
) -> (CostateGuess, RootReport) {
    let residual_fn = |x: &DVector<f64>| -> DVector<f64> {
        let eta: CostateGuess = x.as_slice().try_into().expect("eta dim");
        if !eta.iter().all(|v| v.is_finite()) {
            return DVector::from_element(7, f64::NAN);
        }
        match residual(problem, &eta, rho) {
            Ok(psi) => DVector::from_row_slice(&psi),
            Err(_) => DVector::from_element(7, f64::NAN),
        }
    };
    let jacobian_fn = |x: &DVector<f64>| -> DMatrix<f64> {
        let eta: CostateGuess = x.as_slice().try_into().expect("eta dim");
        match residual_jacobian(problem, &eta, rho) {
            Ok(j) => DMatrix::from_fn(7, 7, |i, k| j[(i, k)]),
            Err(_) => DMatrix::from_element(7, 7, f64::NAN),
        }
    };
    let mut cfg = *root_cfg;
    cfg.jacobian_mode = if problem.use_stm {
        JacobianMode::Analytic
    } else {
        JacobianMode::FiniteDifference
    };
    let (x, report) = dogleg::solve_root(
        residual_fn,
        Some(jacobian_fn),
        &DVector::from_row_slice(eta0),
        &cfg,
    );
    (x.as_slice().try_into().expect("eta dim"), report)
}

/// Numerical continuation over the rho ladder, warm-starting every stage
/// from the previous solution. The report is converged only when every stage
/// converged; the final mass is read off the rho_final trajectory.
pub fn solve_with_continuation(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    schedule: &ContinuationSchedule,
    root_cfg: &RootSolveConfig,
) -> Result<SolveReport, ShootingError> {
    problem.validate()?;
    schedule.validate()?;
    let started = std::time::Instant::now();
    let ladder = schedule.ladder();
    let mut eta = *eta0;
    let mut stages = Vec::with_capacity(ladder.len());

    for (idx, &rho) in ladder.iter().enumerate() {
        let (eta_next, report) = solve_stage(problem, &eta, rho, root_cfg);
        stages.push(StageReport {
            rho,
            iterations: report.iterations,
            residual_evals: report.residual_evals,
            jacobian_evals: report.jacobian_evals,
            residual_inf_norm: report.residual_inf_norm,
            converged: report.converged,
            termination: report.termination,
        });
        if !report.converged {
            return Ok(SolveReport {
                converged: false,
                eta0_solution: eta,
                final_mass_kg: f64::NAN,
                stages,
                failed_stage: Some(idx),
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
        eta = eta_next;
    }

    let zf = propagate(problem, &eta, schedule.rho_final)?;
    Ok(SolveReport {
        converged: true,
        eta0_solution: eta,
        final_mass_kg: zf[6] * problem.scale.mass_unit_kg,
        stages,
        failed_stage: None,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// One record of [`sample_solution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    /// State in the backend's own coordinates.
    pub state: [f64; 6],
    /// Cartesian position (derived for the Mee backend).
    pub r: [f64; 3],
    pub v: [f64; 3],
    pub m: f64,
    pub lam: [f64; 6],
    pub lam_m: f64,
    pub s: f64,
    pub delta: f64,
    pub alpha_hat: [f64; 3],
    pub hamiltonian: f64,
}

/// Dense sampling of a (typically converged) trajectory at n uniform times,
/// carrying everything needed for throttle/switching plots and trajectory
/// views.
pub fn sample_solution(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
    n_points: usize,
) -> Result<Vec<SamplePoint>, ShootingError> {
    problem.validate()?;
    if n_points < 2 {
        return Err(ShootingError::Invalid("need at least two sample points"));
    }
    let cfg = problem.smoothing(rho);
    let times: Vec<f64> = (0..n_points)
        .map(|i| problem.tof * i as f64 / (n_points - 1) as f64)
        .collect();
    let z0 = problem.initial_state(eta0);
    let mut samples = Vec::with_capacity(n_points);
    let mut sample_err: Option<DynError> = None;

    numerics::integrate_with_samples(
        |_t, y, dy| {
            let z: &[f64; AUG_DIM] = y.try_into().expect("aug dim");
            let dz = problem.eval_rhs(rho, z)?;
            dy.copy_from_slice(&dz);
            Ok(())
        },
        &z0,
        0.0,
        problem.tof,
        &problem.integrator,
        &times,
        |t, y| {
            if sample_err.is_some() {
                return;
            }
            let z: &[f64; AUG_DIM] = y.try_into().expect("aug dim");
            match sample_point(problem, &cfg, t, z) {
                Ok(pt) => samples.push(pt),
                Err(e) => sample_err = Some(e),
            }
        },
    )?;
    if let Some(e) = sample_err {
        return Err(e.into());
    }
    Ok(samples)
}

fn sample_point(
    problem: &ShootingProblem,
    cfg: &SmoothingConfig,
    t: f64,
    z: &[f64; AUG_DIM],
) -> Result<SamplePoint, DynError> {
    let mut state = [0.0; 6];
    state.copy_from_slice(&z[..6]);
    let mut lam = [0.0; 6];
    lam.copy_from_slice(&z[7..13]);

    let (r, v, ctrl, ham) = match problem.backend {
        Backend::Cartesian => {
            let zs = CartesianAugState::from_array(z);
            let ctrl = cartesian::control(&zs, &problem.params, cfg);
            let ham = cartesian::hamiltonian(&zs, &problem.params, cfg)?;
            (zs.r, zs.v, ctrl, ham)
        }
        Backend::Mee => {
            let zs = MeeAugState::from_array(z);
            let ctrl = mee::mee_control(&zs, &problem.params, cfg);
            let ham = mee::mee_hamiltonian(&zs, &problem.params, cfg)?;
            let (r, v) = mee::mee_to_cartesian(&zs.elements, problem.params.mu)?;
            (r, v, ctrl, ham)
        }
        Backend::Cr3bp => {
            let zs = Cr3bpAugState::from_array(z);
            let ctrl = cr3bp::cr3bp_switching(&zs, &problem.params, cfg);
            let ham = cr3bp::cr3bp_hamiltonian(&zs, &problem.params, cfg)?;
            (zs.r, zs.v, ctrl, ham)
        }
    };

    Ok(SamplePoint {
        t,
        state,
        r: [r.x, r.y, r.z],
        v: [v.x, v.y, v.z],
        m: z[6],
        lam,
        lam_m: z[13],
        s: ctrl.s,
        delta: ctrl.delta,
        alpha_hat: [ctrl.alpha_hat.x, ctrl.alpha_hat.y, ctrl.alpha_hat.z],
        hamiltonian: ham,
    })
}

/// Count full revolutions swept by the sampled trajectory (accumulated
/// in-plane longitude divided by 2 pi, rounded down).
pub fn revolutions_from_samples(samples: &[SamplePoint]) -> u32 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for pt in samples {
        let ang = pt.r[1].atan2(pt.r[0]);
        if let Some(p) = prev {
            let mut d = ang - p;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            total += d;
        }
        prev = Some(ang);
    }
    (total.abs() / (2.0 * std::f64::consts::PI)).floor() as u32
}
