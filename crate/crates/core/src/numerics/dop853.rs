//! Dormand-Prince 8(5,3) adaptive integrator.
//!
//! Twelve-stage embedded Runge-Kutta pair of order 8 with the combined
//! 5th/3rd-order error estimate and step-size controller of Hairer's dop853.
//! Output at user-requested sample times is produced by clipping steps to land
//! exactly on each requested time, so no interpolation error enters reported
//! samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerances and limits for one integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Initial step size; `None` selects it from the local derivative scale.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-13,
            max_steps: 500_000,
            initial_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(OdeError::BadConfig("tolerances must be positive"));
        }
        if self.max_steps == 0 {
            return Err(OdeError::BadConfig("max_steps must be positive"));
        }
        Ok(())
    }
}

/// Failure inside a right-hand-side evaluation, carried back out of the
/// integrator with the time at which it became unavoidable.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{reason}")]
pub struct RhsError {
    pub reason: &'static str,
}

impl RhsError {
    pub fn new(reason: &'static str) -> Self {
        Self { reason }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("invalid integrator configuration: {0}")]
    BadConfig(&'static str),
    #[error("time span must satisfy tf >= t0")]
    BadTimeSpan,
    #[error("maximum step count exceeded at t = {t}")]
    MaxSteps { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("right-hand side rejected the state at t = {t}: {source}")]
    Rhs { t: f64, source: RhsError },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
}

// Hairer's dop853 tableau, kept at full published precision.
#[allow(clippy::excessive_precision)]
mod tableau {
pub(super) const A21: f64 = 5.26001519587677318785587544488E-2;
pub(super) const A31: f64 = 1.97250569845378994544595329183E-2;
pub(super) const A32: f64 = 5.91751709536136983633785987549E-2;
pub(super) const A41: f64 = 2.95875854768068491816892993775E-2;
pub(super) const A43: f64 = 8.87627564304205475450678981324E-2;
pub(super) const A51: f64 = 2.41365134159266685502369798665E-1;
pub(super) const A53: f64 = -8.84549479328286085344864962717E-1;
pub(super) const A54: f64 = 9.24834003261792003115737966543E-1;
pub(super) const A61: f64 = 3.7037037037037037037037037037E-2;
pub(super) const A64: f64 = 1.70828608729473871279604482173E-1;
pub(super) const A65: f64 = 1.25467687566822425016691814123E-1;
pub(super) const A71: f64 = 3.7109375E-2;
pub(super) const A74: f64 = 1.70252211019544039314978060272E-1;
pub(super) const A75: f64 = 6.02165389804559606850219397283E-2;
pub(super) const A76: f64 = -1.7578125E-2;
pub(super) const A81: f64 = 3.70920001185047927108779319836E-2;
pub(super) const A84: f64 = 1.70383925712239993810214054705E-1;
pub(super) const A85: f64 = 1.07262030446373284651809199168E-1;
pub(super) const A86: f64 = -1.53194377486244017527936158236E-2;
pub(super) const A87: f64 = 8.27378916381402288758473766002E-3;
pub(super) const A91: f64 = 6.24110958716075717114429577812E-1;
pub(super) const A94: f64 = -3.36089262944694129406857109825E0;
pub(super) const A95: f64 = -8.68219346841726006818189891453E-1;
pub(super) const A96: f64 = 2.75920996994467083049415600797E1;
pub(super) const A97: f64 = 2.01540675504778934086186788979E1;
pub(super) const A98: f64 = -4.34898841810699588477366255144E1;
pub(super) const A101: f64 = 4.77662536438264365890433908527E-1;
pub(super) const A104: f64 = -2.48811461997166764192642586468E0;
pub(super) const A105: f64 = -5.90290826836842996371446475743E-1;
pub(super) const A106: f64 = 2.12300514481811942347288949897E1;
pub(super) const A107: f64 = 1.52792336328824235832596922938E1;
pub(super) const A108: f64 = -3.32882109689848629194453265587E1;
pub(super) const A109: f64 = -2.03312017085086261358222928593E-2;
pub(super) const A111: f64 = -9.3714243008598732571704021658E-1;
pub(super) const A114: f64 = 5.18637242884406370830023853209E0;
pub(super) const A115: f64 = 1.09143734899672957818500254654E0;
pub(super) const A116: f64 = -8.14978701074692612513997267357E0;
pub(super) const A117: f64 = -1.85200656599969598641566180701E1;
pub(super) const A118: f64 = 2.27394870993505042818970056734E1;
pub(super) const A119: f64 = 2.49360555267965238987089396762E0;
pub(super) const A1110: f64 = -3.0467644718982195003823669022E0;
pub(super) const A121: f64 = 2.27331014751653820792359768449E0;
pub(super) const A124: f64 = -1.05344954667372501984066689879E1;
pub(super) const A125: f64 = -2.00087205822486249909675718444E0;
pub(super) const A126: f64 = -1.79589318631187989172765950534E1;
pub(super) const A127: f64 = 2.79488845294199600508499808837E1;
pub(super) const A128: f64 = -2.85899827713502369474065508674E0;
pub(super) const A129: f64 = -8.87285693353062954433549289258E0;
pub(super) const A1210: f64 = 1.23605671757943030647266201528E1;
pub(super) const A1211: f64 = 6.43392746015763530355970484046E-1;

pub(super) const B1: f64 = 5.42937341165687622380535766363E-2;
pub(super) const B6: f64 = 4.45031289275240888144113950566E0;
pub(super) const B7: f64 = 1.89151789931450038304281599044E0;
pub(super) const B8: f64 = -5.8012039600105847814672114227E0;
pub(super) const B9: f64 = 3.1116436695781989440891606237E-1;
pub(super) const B10: f64 = -1.52160949662516078556178806805E-1;
pub(super) const B11: f64 = 2.01365400804030348374776537501E-1;
pub(super) const B12: f64 = 4.47106157277725905176885569043E-2;

pub(super) const BHH1: f64 = 0.244094488188976377952755905512E+00;
pub(super) const BHH2: f64 = 0.733846688281611857341361741547E+00;
pub(super) const BHH3: f64 = 0.220588235294117647058823529412E-01;

pub(super) const C2: f64 = 0.526001519587677318785587544488E-01;
pub(super) const C3: f64 = 0.789002279381515978178381316732E-01;
pub(super) const C4: f64 = 0.118350341907227396726757197510E+00;
pub(super) const C5: f64 = 0.281649658092772603273242802490E+00;
pub(super) const C6: f64 = 0.333333333333333333333333333333E+00;
pub(super) const C7: f64 = 0.25E+00;
pub(super) const C8: f64 = 0.307692307692307692307692307692E+00;
pub(super) const C9: f64 = 0.651282051282051282051282051282E+00;
pub(super) const C10: f64 = 0.6E+00;
pub(super) const C11: f64 = 0.857142857142857142857142857142E+00;

pub(super) const ER1: f64 = 0.1312004499419488073250102996E-01;
pub(super) const ER6: f64 = -0.1225156446376204440720569753E+01;
pub(super) const ER7: f64 = -0.4957589496572501915214079952E+00;
pub(super) const ER8: f64 = 0.1664377182454986536961530415E+01;
pub(super) const ER9: f64 = -0.3503288487499736816886487290E+00;
pub(super) const ER10: f64 = 0.3341791187130174790297318841E+00;
pub(super) const ER11: f64 = 0.8192320648511571246570742613E-01;
pub(super) const ER12: f64 = -0.2235530786388629525884427845E-01;
}
use tableau::*;

const SAFE: f64 = 0.9;
// Step-ratio bounds: h_new/h is kept within [FAC_MIN, FAC_MAX].
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

/// Integrate `f` from `t0` to `tf`, invoking `on_sample` at every requested
/// sample time (strictly increasing, inside `[t0, tf]`), and return `y(tf)`.
pub fn integrate_with_samples<F>(
    mut f: F,
    y0: &[f64],
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
    sample_times: &[f64],
    mut on_sample: impl FnMut(f64, &[f64]),
) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsError>,
{
    cfg.validate()?;
    if !(tf >= t0) {
        return Err(OdeError::BadTimeSpan);
    }
    let n = y0.len();
    let mut y = y0.to_vec();

    let mut next_sample = 0usize;
    let span = tf - t0;
    let time_eps = 1e-14 * span.abs().max(1.0);
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 + time_eps {
        on_sample(sample_times[next_sample], &y);
        next_sample += 1;
    }
    if span == 0.0 {
        return Ok(y);
    }

    let mut k: Vec<Vec<f64>> = (0..12).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let mut t = t0;
    f(t, &y, &mut k[0]).map_err(|source| OdeError::Rhs { t, source })?;

    let mut h = match cfg.initial_step {
        Some(h0) if h0 > 0.0 => h0.min(span),
        _ => initial_step(&mut f, t0, &y, &k[0].clone(), tf, cfg)
            .map_err(|source| OdeError::Rhs { t, source })?,
    };

    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < tf - time_eps {
        if steps >= cfg.max_steps {
            return Err(OdeError::MaxSteps { t });
        }
        steps += 1;

        // Clip to the next sample time and the final time.
        let mut h_step = h.min(tf - t);
        if next_sample < sample_times.len() {
            let ts = sample_times[next_sample];
            if ts > t + time_eps {
                h_step = h_step.min(ts - t);
            }
        }
        if h_step.abs() < f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }

        match attempt_step(&mut f, t, &y, h_step, &mut k, &mut y_stage, &mut y_new) {
            Ok(()) => {}
            Err(source) => {
                // A stage left the rhs domain: retry with a smaller step until
                // the step size underflows.
                h = h_step / 4.0;
                if h < 1e3 * f64::EPSILON * t.abs().max(1.0) {
                    return Err(OdeError::Rhs { t, source });
                }
                continue;
            }
        }

        // Combined 5th/3rd-order error estimate.
        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for i in 0..n {
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            let ksum = B1 * k[0][i]
                + B6 * k[5][i]
                + B7 * k[6][i]
                + B8 * k[7][i]
                + B9 * k[8][i]
                + B10 * k[9][i]
                + B11 * k[10][i]
                + B12 * k[11][i];
            let e3 = ksum - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
            err3 += (e3 / sk) * (e3 / sk);
            let e5 = ER1 * k[0][i]
                + ER6 * k[5][i]
                + ER7 * k[6][i]
                + ER8 * k[7][i]
                + ER9 * k[8][i]
                + ER10 * k[9][i]
                + ER11 * k[10][i]
                + ER12 * k[11][i];
            err5 += (e5 / sk) * (e5 / sk);
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h_step.abs() * err5 * (1.0 / (deno * n as f64)).sqrt();

        if !err.is_finite() {
            if !y.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }
            h = h_step / 2.0;
            if h < 1e3 * f64::EPSILON * t.abs().max(1.0) {
                return Err(OdeError::NonFinite { t });
            }
            continue;
        }

        let fac11 = err.powf(0.125);
        if err <= 1.0 {
            // Accepted.
            t += h_step;
            std::mem::swap(&mut y, &mut y_new);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }

            while next_sample < sample_times.len() && sample_times[next_sample] <= t + time_eps {
                on_sample(sample_times[next_sample], &y);
                next_sample += 1;
            }

            if t < tf - time_eps {
                f(t, &y, &mut k[0]).map_err(|source| OdeError::Rhs { t, source })?;
            }

            let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_step / fac;
            if last_rejected {
                h_new = h_new.min(h_step);
            }
            last_rejected = false;
            h = h_new;
        } else {
            // Rejected.
            h = h_step / (fac11 / SAFE).min(1.0 / FAC_MIN);
            last_rejected = true;
            if h < f64::EPSILON * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t });
            }
        }
    }

    while next_sample < sample_times.len() && sample_times[next_sample] <= tf + time_eps {
        on_sample(sample_times[next_sample], &y);
        next_sample += 1;
    }
    Ok(y)
}

/// Integrate and return only the final state.
pub fn integrate<F>(
    f: F,
    y0: &[f64],
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsError>,
{
    integrate_with_samples(f, y0, t0, tf, cfg, &[], |_, _| {})
}

fn attempt_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    h: f64,
    k: &mut [Vec<f64>],
    y_stage: &mut [f64],
    y_new: &mut [f64],
) -> Result<(), RhsError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsError>,
{
    let n = y.len();
    // Stage coefficients: (c, weights over previous k's).
    macro_rules! stage {
        ($idx:expr, $c:expr, $( ($j:expr, $a:expr) ),+ ) => {{
            for i in 0..n {
                let mut acc = 0.0;
                $( acc += $a * k[$j][i]; )+
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut($idx);
            let _ = head;
            f(t + $c * h, y_stage, &mut tail[0])?;
        }};
    }

    stage!(1, C2, (0, A21));
    stage!(2, C3, (0, A31), (1, A32));
    stage!(3, C4, (0, A41), (2, A43));
    stage!(4, C5, (0, A51), (2, A53), (3, A54));
    stage!(5, C6, (0, A61), (3, A64), (4, A65));
    stage!(6, C7, (0, A71), (3, A74), (4, A75), (5, A76));
    stage!(7, C8, (0, A81), (3, A84), (4, A85), (5, A86), (6, A87));
    stage!(8, C9, (0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98));
    stage!(
        9,
        C10,
        (0, A101),
        (3, A104),
        (4, A105),
        (5, A106),
        (6, A107),
        (7, A108),
        (8, A109)
    );
    stage!(
        10,
        C11,
        (0, A111),
        (3, A114),
        (4, A115),
        (5, A116),
        (6, A117),
        (7, A118),
        (8, A119),
        (9, A1110)
    );
    stage!(
        11,
        1.0,
        (0, A121),
        (3, A124),
        (4, A125),
        (5, A126),
        (6, A127),
        (7, A128),
        (8, A129),
        (9, A1210),
        (10, A1211)
    );

    for i in 0..n {
        let ksum = B1 * k[0][i]
            + B6 * k[5][i]
            + B7 * k[6][i]
            + B8 * k[7][i]
            + B9 * k[8][i]
            + B10 * k[9][i]
            + B11 * k[10][i]
            + B12 * k[11][i];
        y_new[i] = y[i] + h * ksum;
    }
    Ok(())
}

/// Hairer's automatic initial step selection.
fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    tf: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, RhsError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsError>,
{
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        dnf += (f0[i] / sk) * (f0[i] / sk);
        dny += (y0[i] / sk) * (y0[i] / sk);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(tf - t0);

    // One explicit Euler step to estimate the second derivative.
    let mut y1 = vec![0.0; n];
    for i in 0..n {
        y1[i] = y0[i] + h * f0[i];
    }
    let mut f1 = vec![0.0; n];
    match f(t0 + h, &y1, &mut f1) {
        Ok(()) => {}
        Err(_) => return Ok((h * 1e-3).max(1e-10)),
    }
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
    }
    let der2 = der2.sqrt() / h;

    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    Ok((100.0 * h).min(h1).min(tf - t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kepler_rhs(mu: f64) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsError> {
        move |_t, y, dy| {
            let r3 = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt().powi(3);
            if r3 == 0.0 {
                return Err(RhsError::new("r = 0"));
            }
            dy[0] = y[3];
            dy[1] = y[4];
            dy[2] = y[5];
            dy[3] = -mu * y[0] / r3;
            dy[4] = -mu * y[1] / r3;
            dy[5] = -mu * y[2] / r3;
            Ok(())
        }
    }

    fn energy(y: &[f64], mu: f64) -> f64 {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let v2 = y[3] * y[3] + y[4] * y[4] + y[5] * y[5];
        v2 / 2.0 - mu / r
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::default();
        let y = integrate(
            |_t, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            &[1.0],
            0.0,
            1.0,
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(y[0], (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn circular_orbit_closes_after_one_period() {
        let cfg = IntegratorConfig::default();
        let y0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let y = integrate(
            kepler_rhs(1.0),
            &y0,
            0.0,
            2.0 * std::f64::consts::PI,
            &cfg,
        )
        .unwrap();
        for i in 0..6 {
            assert!((y[i] - y0[i]).abs() < 1e-9, "component {i}: {}", y[i]);
        }
    }

    #[test]
    fn kepler_energy_drift_hundred_orbits() {
        let cfg = IntegratorConfig::default();
        let y0 = [1.0, 0.0, 0.0, 0.0, 1.1, 0.1];
        let e0 = energy(&y0, 1.0);
        let y = integrate(
            kepler_rhs(1.0),
            &y0,
            0.0,
            100.0 * 2.0 * std::f64::consts::PI,
            &cfg,
        )
        .unwrap();
        assert!((energy(&y, 1.0) - e0).abs() < 1e-8);
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        let y0 = [1.0, 0.0, 0.0, 0.0, 0.9, 0.2];
        let tf = 2.0 * std::f64::consts::PI;
        // Reference at 1e-13.
        let reference = integrate(kepler_rhs(1.0), &y0, 0.0, tf, &IntegratorConfig::default())
            .unwrap();
        let err_at = |tol: f64| {
            let cfg = IntegratorConfig {
                rel_tol: tol,
                abs_tol: tol,
                ..Default::default()
            };
            let y = integrate(kepler_rhs(1.0), &y0, 0.0, tf, &cfg).unwrap();
            y.iter()
                .zip(reference.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let errs: Vec<f64> = [1e-5, 1e-7, 1e-9, 1e-11].iter().map(|&t| err_at(t)).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] > errs[3], "{errs:?}");
        assert!(errs[3] < 1e-9);
    }

    #[test]
    fn samples_hit_exact_times() {
        let cfg = IntegratorConfig::default();
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let mut seen = Vec::new();
        let _ = integrate_with_samples(
            |_t, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            &[1.0],
            0.0,
            1.0,
            &cfg,
            &times,
            |t, y| seen.push((t, y[0])),
        )
        .unwrap();
        assert_eq!(seen.len(), times.len());
        for (t, v) in &seen {
            assert_relative_eq!(*v, t.exp(), epsilon = 1e-11);
        }
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let cfg = IntegratorConfig::default();
        let y = integrate(|_t, _y, dy| { dy[0] = 1.0; Ok(()) }, &[7.0], 2.0, 2.0, &cfg).unwrap();
        assert_eq!(y[0], 7.0);
    }

    #[test]
    fn max_steps_reported() {
        let cfg = IntegratorConfig {
            max_steps: 10,
            ..Default::default()
        };
        let res = integrate(kepler_rhs(1.0), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 0.0, 1000.0, &cfg);
        assert!(matches!(res, Err(OdeError::MaxSteps { .. })));
    }

    #[test]
    fn rhs_rejection_propagates() {
        // Radial plunge reaches r = 0; the rhs rejection must surface.
        let cfg = IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            ..Default::default()
        };
        let res = integrate(
            kepler_rhs(1.0),
            &[1.0, 0.0, 0.0, -1.5, 0.0, 0.0],
            0.0,
            10.0,
            &cfg,
        );
        assert!(res.is_err());
    }

    #[test]
    fn non_finite_state_detected() {
        // Finite-time blowup y' = y².
        let cfg = IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_steps: 100_000,
            ..Default::default()
        };
        let res = integrate(
            |_t, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            0.0,
            2.0,
            &cfg,
        );
        assert!(res.is_err(), "{res:?}");
    }
}
