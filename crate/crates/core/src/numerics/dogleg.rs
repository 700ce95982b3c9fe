//! Hybrid dog-leg trust-region solver for square nonlinear systems.
//!
//! The step interpolates between the scaled steepest-descent (Cauchy) point
//! and the Newton point inside an adaptive trust radius. Between full Jacobian
//! evaluations the model is kept current with Broyden rank-1 updates; a full
//! re-evaluation is triggered when a step is rejected under a stale model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// How the residual Jacobian is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacobianMode {
    /// Caller supplies the Jacobian (for shooting problems, via the STM).
    Analytic,
    /// Forward finite differences of the residual, column step
    /// fd_step_rel * |x_j| as in Powell's hybrid reference implementation.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolveConfig {
    pub max_iters: usize,
    /// Convergence threshold on the residual infinity norm.
    pub residual_tol: f64,
    pub jacobian_mode: JacobianMode,
    /// Relative step for finite differences: h_j = fd_step_rel * |x_j|
    /// (fd_step_rel itself when x_j vanishes).
    pub fd_step_rel: f64,
    /// Initial trust radius as a multiple of max(1, ||x0||).
    pub radius_factor: f64,
    /// Give up after this many Jacobian rebuilds without a 10% residual
    /// reduction (and after twice as many steps without a 0.1% one).
    pub no_progress_jacobians: usize,
    /// Budget of residual evaluations, counting finite-difference stencils.
    pub max_residual_evals: usize,
}

impl Default for RootSolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            residual_tol: 1e-8,
            jacobian_mode: JacobianMode::Analytic,
            fd_step_rel: f64::EPSILON.sqrt(),
            radius_factor: 1.0,
            no_progress_jacobians: 30,
            max_residual_evals: 1600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIters,
    TrustRadiusCollapse,
    NonFiniteResidual,
    NonFiniteJacobian,
    /// Residual norm stopped improving (Powell's no-good-progress exits).
    NoProgress,
    /// Residual evaluation budget exhausted.
    EvalBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub termination: Termination,
    pub converged: bool,
    pub iterations: usize,
    pub residual_evals: usize,
    pub jacobian_evals: usize,
    pub residual_inf_norm: f64,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Find `x` with `residual(x) = 0` starting from `x0`.
///
/// A residual containing non-finite entries marks the point as outside the
/// solvable domain; trial points are then rejected, and a non-finite residual
/// at the current iterate aborts the solve.
pub fn solve_root<R, J>(
    mut residual: R,
    mut jacobian: Option<J>,
    x0: &DVector<f64>,
    cfg: &RootSolveConfig,
) -> (DVector<f64>, RootReport)
where
    R: FnMut(&DVector<f64>) -> DVector<f64>,
    J: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    assert!(
        cfg.jacobian_mode == JacobianMode::FiniteDifference || jacobian.is_some(),
        "analytic Jacobian mode requires a jacobian function"
    );
    let n = x0.len();
    let mut nfev = 0usize;
    let mut njev = 0usize;

    let report = |termination: Termination,
                  iterations: usize,
                  nfev: usize,
                  njev: usize,
                  res: f64| RootReport {
        termination,
        converged: termination == Termination::Converged,
        iterations,
        residual_evals: nfev,
        jacobian_evals: njev,
        residual_inf_norm: res,
    };

    let mut x = x0.clone();
    let mut fx = residual(&x);
    nfev += 1;
    assert_eq!(fx.len(), n, "residual dimension must match unknowns");
    if !all_finite(&fx) {
        let r = report(Termination::NonFiniteResidual, 0, nfev, njev, f64::NAN);
        return (x, r);
    }
    if inf_norm(&fx) < cfg.residual_tol {
        let norm = inf_norm(&fx);
        let r = report(Termination::Converged, 0, nfev, njev, norm);
        return (x, r);
    }

    let mut eval_full_jacobian = |x: &DVector<f64>,
                                  fx_base: &DVector<f64>,
                                  residual: &mut R,
                                  nfev: &mut usize,
                                  njev: &mut usize|
     -> DMatrix<f64> {
        *njev += 1;
        match cfg.jacobian_mode {
            JacobianMode::Analytic => (jacobian.as_mut().expect("checked above"))(x),
            JacobianMode::FiniteDifference => {
                let mut jac = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut h = cfg.fd_step_rel * x[j].abs();
                    if h == 0.0 {
                        h = cfg.fd_step_rel;
                    }
                    let mut xp = x.clone();
                    xp[j] += h;
                    let fp = residual(&xp);
                    *nfev += 1;
                    for i in 0..n {
                        jac[(i, j)] = (fp[i] - fx_base[i]) / h;
                    }
                }
                jac
            }
        }
    };

    let mut jac = eval_full_jacobian(&x, &fx, &mut residual, &mut nfev, &mut njev);
    if !jac.iter().all(|v| v.is_finite()) {
        let norm = inf_norm(&fx);
        let r = report(Termination::NonFiniteJacobian, 0, nfev, njev, norm);
        return (x, r);
    }
    let mut jac_age = 0usize;

    let mut delta = cfg.radius_factor * x.norm().max(1.0);
    let delta_max = 1e6 * delta;

    // Powell-style no-good-progress counters.
    let mut nslow1 = 0usize; // steps without even marginal norm reduction
    let mut nslow2 = 0usize; // Jacobian rebuilds without a substantial one

    for iter in 1..=cfg.max_iters {
        if nfev >= cfg.max_residual_evals {
            let norm = inf_norm(&fx);
            let r = report(Termination::EvalBudget, iter, nfev, njev, norm);
            return (x, r);
        }
        let grad = jac.transpose() * &fx;
        let newton = jac.clone().lu().solve(&(-&fx)).filter(|p| all_finite(p));

        let step = dogleg_step(&jac, &grad, newton.as_ref(), delta);
        let step = match step {
            Some(p) => p,
            None => {
                // No usable direction (vanishing gradient). A stale model may
                // be the reason; otherwise the iteration is genuinely stuck.
                if jac_age > 0 {
                    jac = eval_full_jacobian(&x, &fx, &mut residual, &mut nfev, &mut njev);
                    if !jac.iter().all(|v| v.is_finite()) {
                        let norm = inf_norm(&fx);
                        let r = report(Termination::NonFiniteJacobian, iter, nfev, njev, norm);
                        return (x, r);
                    }
                    jac_age = 0;
                    continue;
                }
                let norm = inf_norm(&fx);
                let r = report(Termination::TrustRadiusCollapse, iter, nfev, njev, norm);
                return (x, r);
            }
        };

        let step_norm = step.norm();
        if step_norm < 1e-15 * x.norm().max(1.0) {
            let norm = inf_norm(&fx);
            let r = report(Termination::TrustRadiusCollapse, iter, nfev, njev, norm);
            return (x, r);
        }

        let xt = &x + &step;
        let ft = residual(&xt);
        nfev += 1;

        let fx_sq = fx.norm_squared();
        let model = &fx + &jac * &step;
        let predicted = fx_sq - model.norm_squared();
        let actual = if all_finite(&ft) {
            fx_sq - ft.norm_squared()
        } else {
            f64::NEG_INFINITY
        };
        let ratio = if predicted > 0.0 {
            actual / predicted
        } else {
            -1.0
        };

        // Progress bookkeeping on the squared-norm reduction.
        let norm_reduction = if actual.is_finite() {
            actual / fx_sq
        } else {
            -1.0
        };
        if norm_reduction >= 1e-3 {
            nslow1 = 0;
        } else {
            nslow1 += 1;
        }
        if norm_reduction >= 0.1 {
            nslow2 = 0;
        }

        if ratio > 1e-4 {
            // Accept, with a Broyden rank-1 refresh of the model.
            let df = &ft - &fx;
            let correction = (&df - &jac * &step) * (step.transpose() / step_norm.powi(2));
            jac += correction;
            jac_age += 1;
            x = xt;
            fx = ft;
            if inf_norm(&fx) < cfg.residual_tol {
                let norm = inf_norm(&fx);
                let r = report(Termination::Converged, iter, nfev, njev, norm);
                return (x, r);
            }
        } else if jac_age > 0 {
            // Rejected under a stale model: rebuild it before shrinking.
            jac = eval_full_jacobian(&x, &fx, &mut residual, &mut nfev, &mut njev);
            if !jac.iter().all(|v| v.is_finite()) {
                let norm = inf_norm(&fx);
                let r = report(Termination::NonFiniteJacobian, iter, nfev, njev, norm);
                return (x, r);
            }
            jac_age = 0;
            nslow2 += 1;
            if nslow2 >= cfg.no_progress_jacobians {
                let norm = inf_norm(&fx);
                let r = report(Termination::NoProgress, iter, nfev, njev, norm);
                return (x, r);
            }
            continue;
        }
        if nslow1 >= 2 * cfg.no_progress_jacobians {
            let norm = inf_norm(&fx);
            let r = report(Termination::NoProgress, iter, nfev, njev, norm);
            return (x, r);
        }

        // Trust radius update.
        if ratio < 0.25 {
            delta = 0.5 * step_norm;
        } else if ratio > 0.75 && step_norm > 0.9 * delta {
            delta = (2.0 * delta).min(delta_max);
        }
        if delta < 1e-13 * x.norm().max(1.0) {
            let norm = inf_norm(&fx);
            let r = report(Termination::TrustRadiusCollapse, iter, nfev, njev, norm);
            return (x, r);
        }
    }

    let norm = inf_norm(&fx);
    let r = report(Termination::MaxIters, cfg.max_iters, nfev, njev, norm);
    (x, r)
}

/// Dog-leg step: the Newton point when it fits inside the radius, otherwise
/// the Cauchy point / Newton segment clipped to the trust boundary.
fn dogleg_step(
    jac: &DMatrix<f64>,
    grad: &DVector<f64>,
    newton: Option<&DVector<f64>>,
    delta: f64,
) -> Option<DVector<f64>> {
    if let Some(pn) = newton {
        if pn.norm() <= delta {
            return Some(pn.clone());
        }
    }

    let gnorm_sq = grad.norm_squared();
    if !(gnorm_sq > 0.0) || !gnorm_sq.is_finite() {
        return None;
    }
    let jg = jac * grad;
    let jg_sq = jg.norm_squared();
    if !(jg_sq > 0.0) || !jg_sq.is_finite() {
        return None;
    }
    // Unconstrained minimizer along -grad.
    let tau = gnorm_sq / jg_sq;
    let cauchy = grad * (-tau);
    let cauchy_norm = cauchy.norm();

    if cauchy_norm >= delta {
        return Some(grad * (-delta / gnorm_sq.sqrt()));
    }

    match newton {
        Some(pn) => {
            // Walk from the Cauchy point toward Newton until the boundary.
            let d = pn - &cauchy;
            let a = d.norm_squared();
            let b = 2.0 * cauchy.dot(&d);
            let c = cauchy_norm.powi(2) - delta * delta;
            let disc = (b * b - 4.0 * a * c).max(0.0);
            let t = if a > 0.0 {
                ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            Some(&cauchy + d * t)
        }
        None => Some(cauchy),
    }
}
