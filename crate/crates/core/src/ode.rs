//! Explicit adaptive integrators with continuous output: Dormand-Prince 5(4)
//! and the damped Runge-Kutta-Chebyshev 2nd-order method for problems whose
//! stiffness sits on the negative real axis.

use nalgebra::SVector;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnakeError};
use crate::kinematics::StateVector;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 5.0;
const MAX_SHRINK: f64 = 0.1;
const PI_BETA: f64 = 0.04;

/// Integration tolerances and step bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            abs_tol: 1e-7,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Right-hand side together with the largest step allowed from this state.
pub trait OdeSystem<const N: usize> {
    fn derivative(&mut self, t: f64, y: &SVector<f64, N>) -> Result<(SVector<f64, N>, f64)>;
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<(SVector<f64, N>, f64)>,
{
    fn derivative(&mut self, t: f64, y: &SVector<f64, N>) -> Result<(SVector<f64, N>, f64)> {
        self(t, y)
    }
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    t0: f64,
    h: f64,
    shape: Dense<N>,
}

#[derive(Debug, Clone)]
enum Dense<const N: usize> {
    // Hairer's continuous extension of the Dormand-Prince pair.
    Dopri([SVector<f64, N>; 5]),
    // Cubic Hermite through both ends and their slopes.
    Hermite {
        y0: SVector<f64, N>,
        f0: SVector<f64, N>,
        y1: SVector<f64, N>,
        f1: SVector<f64, N>,
    },
}

impl<const N: usize> DenseStep<N> {
    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        match &self.shape {
            Dense::Dopri([r1, r2, r3, r4, r5]) => r1 + (r2 + (r3 + (r4 + r5 * s1) * s) * s1) * s,
            Dense::Hermite { y0, f0, y1, f1 } => {
                let h00 = s1 * s1 * (1.0 + 2.0 * s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h10 = s * s1 * s1 * self.h;
                let h11 = -s * s * s1 * self.h;
                y0 * h00 + y1 * h01 + f0 * h10 + f1 * h11
            }
        }
    }
}

fn error_norm<const N: usize>(
    err: &SVector<f64, N>,
    y0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    control: &StepControl,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let scale = control.abs_tol + control.rel_tol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / scale;
        acc += e * e;
    }
    (acc / N as f64).sqrt()
}

fn check_finite<const N: usize>(t: f64, y: &SVector<f64, N>) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let mut state = StateVector::zeros();
    for (dst, src) in state.iter_mut().zip(y.iter()) {
        *dst = *src;
    }
    Err(SnakeError::NonFiniteState {
        t,
        state: Box::new(state),
    })
}

fn underflow<const N: usize>(t: f64, h: f64, y: &SVector<f64, N>) -> SnakeError {
    let mut state = StateVector::zeros();
    for (dst, src) in state.iter_mut().zip(y.iter()) {
        *dst = *src;
    }
    SnakeError::StepSizeUnderflow {
        t,
        step: h,
        state: Box::new(state),
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Runge-Kutta-Chebyshev, stage count chosen from the spectral radius.
    #[default]
    Rkc,
    Dopri5,
}

/// Integrates from `t0` to `t_end` with `method`, calling `on_step` with the
/// continuous extension of every accepted step. Returns the final state.
pub fn integrate<const N: usize, S, F>(
    method: Method,
    system: &mut S,
    t0: f64,
    y0: SVector<f64, N>,
    t_end: f64,
    control: &StepControl,
    on_step: F,
) -> Result<(SVector<f64, N>, SolverStats)>
where
    S: OdeSystem<N>,
    F: FnMut(&DenseStep<N>) -> Result<()>,
{
    match method {
        Method::Rkc => rkc(system, t0, y0, t_end, control, on_step),
        Method::Dopri5 => dopri5(system, t0, y0, t_end, control, on_step),
    }
}

/// Dormand-Prince 5(4) with a PI step controller.
pub fn dopri5<const N: usize, S, F>(
    system: &mut S,
    t0: f64,
    y0: SVector<f64, N>,
    t_end: f64,
    control: &StepControl,
    mut on_step: F,
) -> Result<(SVector<f64, N>, SolverStats)>
where
    S: OdeSystem<N>,
    F: FnMut(&DenseStep<N>) -> Result<()>,
{
    let mut stats = SolverStats::default();
    let mut t = t0;
    let mut y = y0;
    check_finite(t, &y)?;
    let (mut k1, mut max_step) = system.derivative(t, &y)?;
    stats.evaluations += 1;
    check_finite(t, &k1)?;

    let mut h = initial_step(&y, &k1, control).min(max_step).min(t_end - t);
    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;

    while t < t_end {
        if h < control.min_step {
            return Err(underflow(t, h, &y));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let (k2, _) = system.derivative(t + C2 * h, &(y + k1 * (A21 * h)))?;
        let (k3, _) = system.derivative(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h))?;
        let (k4, _) =
            system.derivative(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
        let (k5, _) = system.derivative(
            t + C5 * h,
            &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
        )?;
        let (k6, _) = system.derivative(
            t + h,
            &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
        )?;
        let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let t1 = if last { t_end } else { t + h };
        let (k7, next_max_step) = system.derivative(t1, &y1)?;
        stats.evaluations += 6;

        let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let err = error_norm(&err_vec, &y, &y1, control);
        let finite = err.is_finite() && y1.iter().all(|v| v.is_finite());

        let fac11 = if finite { err.powf(0.2 - PI_BETA * 0.75) } else { 1e3 };
        if finite && err <= 1.0 {
            let fac = (fac11 / fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / MAX_GROWTH, 1.0 / MAX_SHRINK);
            fac_old = err.max(1e-4);
            let r2 = y1 - y;
            let r3 = k1 * h - r2;
            let dense = DenseStep {
                t0: t,
                h,
                shape: Dense::Dopri([
                    y,
                    r2,
                    r3,
                    r2 - k7 * h - r3,
                    (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
                ]),
            };
            on_step(&dense)?;
            stats.accepted += 1;
            t = t1;
            y = y1;
            k1 = k7;
            max_step = next_max_step;
            let mut h_new = h / fac;
            if rejected_last {
                h_new = h_new.min(h);
            }
            rejected_last = false;
            h = h_new.min(max_step);
        } else {
            stats.rejected += 1;
            rejected_last = true;
            let shrink = if finite {
                (fac11 / SAFETY).min(1.0 / MAX_SHRINK)
            } else {
                1.0 / MAX_SHRINK
            };
            h /= shrink;
        }
    }
    check_finite(t, &y)?;
    Ok((y, stats))
}

// Damping of the Chebyshev stability polynomial.
const RKC_DAMPING: f64 = 2.0 / 13.0;
const RKC_MAX_STAGES: usize = 250;
// Accepted steps between spectral radius estimates.
const RKC_RHO_INTERVAL: usize = 25;
const RKC_RHO_ITERATIONS: usize = 50;

/// Dominant eigenvalue magnitude of the Jacobian at `(t, y)`, by a nonlinear
/// power iteration on difference quotients. `v` carries the eigenvector
/// guess between calls.
fn spectral_radius<const N: usize, S: OdeSystem<N>>(
    system: &mut S,
    t: f64,
    y: &SVector<f64, N>,
    f: &SVector<f64, N>,
    v: &mut SVector<f64, N>,
    stats: &mut SolverStats,
) -> Result<f64> {
    let sqrt_u = f64::EPSILON.sqrt();
    let y_norm = y.norm();
    let dy = if y_norm > 0.0 { y_norm * sqrt_u } else { sqrt_u };
    // A fixed spread direction keeps the guess out of invariant subspaces
    // such as the one `f` itself may lie in.
    let spread = SVector::<f64, N>::from_fn(|i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 + i as f64 / N as f64)
    })
    .normalize();
    let v_norm = v.norm();
    let mut dir = if v_norm > 0.0 { *v / v_norm } else { spread };
    dir += spread * 0.1;
    let mut probe = y + dir * (dy / dir.norm());
    let mut sigma: f64 = 0.0;
    for iter in 0..RKC_RHO_ITERATIONS {
        let (fv, _) = system.derivative(t, &probe)?;
        stats.evaluations += 1;
        let df = fv - f;
        let df_norm = df.norm();
        let last = sigma;
        sigma = df_norm / dy;
        if !sigma.is_finite() {
            break;
        }
        if iter >= 1 && (sigma - last).abs() <= 0.01 * sigma.max(1e-12) {
            break;
        }
        probe = if df_norm > 0.0 {
            y + df * (dy / df_norm)
        } else {
            let mut p = *y;
            p[iter % N] += dy;
            p
        };
    }
    *v = probe - y;
    Ok(1.2 * sigma)
}

/// Runge-Kutta-Chebyshev 2nd-order method with embedded error estimate.
/// Cost per step grows like the square root of `h` times the spectral
/// radius, so overdamped fast modes do not force tiny steps.
pub fn rkc<const N: usize, S, F>(
    system: &mut S,
    t0: f64,
    y0: SVector<f64, N>,
    t_end: f64,
    control: &StepControl,
    mut on_step: F,
) -> Result<(SVector<f64, N>, SolverStats)>
where
    S: OdeSystem<N>,
    F: FnMut(&DenseStep<N>) -> Result<()>,
{
    let mut stats = SolverStats::default();
    let mut t = t0;
    let mut y = y0;
    check_finite(t, &y)?;
    let (mut fy, mut max_step) = system.derivative(t, &y)?;
    stats.evaluations += 1;
    check_finite(t, &fy)?;

    let mut eigvec = fy;
    let mut rho = spectral_radius(system, t, &y, &fy, &mut eigvec, &mut stats)?;
    let mut since_rho = 0;
    let mut h = initial_step(&y, &fy, control).min(max_step).min(t_end - t);
    if rho * h > 1.0 {
        h = 1.0 / rho;
    }
    let mut err_old: f64 = 0.0;
    let mut h_old = 0.0;
    let mut rejections_in_row = 0;

    while t < t_end {
        if h < control.min_step {
            return Err(underflow(t, h, &y));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let stages = ((1.0 + 1.54 * h * rho).sqrt().floor() as usize + 1).clamp(2, RKC_MAX_STAGES);
        let y1 = chebyshev_stages(system, t, &y, &fy, h, stages, &mut stats)?;
        let t1 = if last { t_end } else { t + h };
        let finite = y1.iter().all(|v| v.is_finite());
        let next = if finite {
            let (f1, cap) = system.derivative(t1, &y1)?;
            stats.evaluations += 1;
            Some((f1, cap))
        } else {
            None
        };
        let err = match &next {
            Some((f1, _)) if f1.iter().all(|v| v.is_finite()) => {
                let est = (y - y1) * 0.8 + (fy + f1) * (0.4 * h);
                error_norm(&est, &y, &y1, control)
            }
            _ => f64::INFINITY,
        };

        if err <= 1.0 {
            let (f1, cap) = next.expect("accepted step has a derivative");
            on_step(&DenseStep {
                t0: t,
                h,
                shape: Dense::Hermite {
                    y0: y,
                    f0: fy,
                    y1,
                    f1,
                },
            })?;
            stats.accepted += 1;
            let mut fac: f64 = 10.0;
            if stats.accepted == 1 {
                let e = err.cbrt();
                if 0.8 < fac * e {
                    fac = 0.8 / e;
                }
            } else {
                let num = 0.8 * h * err_old.cbrt();
                let den = h_old * err.powf(2.0 / 3.0);
                if num < fac * den {
                    fac = num / den;
                }
            }
            h_old = h;
            err_old = err;
            t = t1;
            y = y1;
            fy = f1;
            max_step = cap;
            rejections_in_row = 0;
            since_rho += 1;
            if since_rho >= RKC_RHO_INTERVAL {
                rho = spectral_radius(system, t, &y, &fy, &mut eigvec, &mut stats)?;
                since_rho = 0;
            }
            h = (h * fac.max(0.1)).min(max_step);
        } else {
            stats.rejected += 1;
            rejections_in_row += 1;
            let shrink = if err.is_finite() {
                (0.8 / err.cbrt()).max(0.1)
            } else {
                0.1
            };
            h *= shrink;
            if rejections_in_row >= 2 {
                rho = spectral_radius(system, t, &y, &fy, &mut eigvec, &mut stats)?;
                since_rho = 0;
            }
        }
    }
    check_finite(t, &y)?;
    Ok((y, stats))
}

/// One step of the `stages`-stage damped Chebyshev recursion.
fn chebyshev_stages<const N: usize, S: OdeSystem<N>>(
    system: &mut S,
    t: f64,
    y: &SVector<f64, N>,
    fy: &SVector<f64, N>,
    h: f64,
    stages: usize,
    stats: &mut SolverStats,
) -> Result<SVector<f64, N>> {
    let s = stages as f64;
    let w0 = 1.0 + RKC_DAMPING / (s * s);
    let t1 = w0 * w0 - 1.0;
    let t2 = t1.sqrt();
    let arg = s * (w0 + t2).ln();
    let w1 = arg.sinh() * t1 / (arg.cosh() * s * t2 - w0 * arg.sinh());

    let mut b_prev = 1.0 / (4.0 * w0 * w0);
    let mut b_prev2 = b_prev;
    let mut mus = w1 * b_prev;
    let mut y_prev2 = *y;
    let mut y_prev = y + fy * (h * mus);
    let mut th_prev2 = 0.0;
    let mut th_prev = mus;
    let (mut z_prev, mut z_prev2) = (w0, 1.0);
    let (mut dz_prev, mut dz_prev2) = (1.0, 0.0);
    let (mut d2z_prev, mut d2z_prev2) = (0.0, 0.0);

    for _ in 2..=stages {
        let z = 2.0 * w0 * z_prev - z_prev2;
        let dz = 2.0 * w0 * dz_prev - dz_prev2 + 2.0 * z_prev;
        let d2z = 2.0 * w0 * d2z_prev - d2z_prev2 + 4.0 * dz_prev;
        let b = d2z / (dz * dz);
        let a_prev = 1.0 - z_prev * b_prev;
        let mu = 2.0 * w0 * b / b_prev;
        let nu = -b / b_prev2;
        mus = mu * w1 / w0;

        let (f_prev, _) = system.derivative(t + h * th_prev, &y_prev)?;
        stats.evaluations += 1;
        let y_next = y * (1.0 - mu - nu) + y_prev * mu + y_prev2 * nu
            + (f_prev - fy * a_prev) * (h * mus);
        let th = mu * th_prev + nu * th_prev2 + mus * (1.0 - a_prev);

        y_prev2 = y_prev;
        y_prev = y_next;
        th_prev2 = th_prev;
        th_prev = th;
        (z_prev2, z_prev) = (z_prev, z);
        (dz_prev2, dz_prev) = (dz_prev, dz);
        (d2z_prev2, d2z_prev) = (d2z_prev, d2z);
        b_prev2 = b_prev;
        b_prev = b;
    }
    Ok(y_prev)
}

fn initial_step<const N: usize>(
    y: &SVector<f64, N>,
    f: &SVector<f64, N>,
    control: &StepControl,
) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let scale = control.abs_tol + control.rel_tol * y[i].abs();
        d0 += (y[i] / scale).powi(2);
        d1 += (f[i] / scale).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}
