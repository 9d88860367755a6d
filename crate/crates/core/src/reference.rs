//! Reference solutions independent of the gap stepper: an adaptive
//! Dormand-Prince integrator, closed-form harmonic motion, and an
//! event-based stick-slip solution for the friction oscillator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::PhaseVector;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl Dopri5 {
    /// Integrates `y' = f(t, y)` from `t0` to `t1`.
    pub fn integrate(
        &self,
        f: impl Fn(f64, &[f64]) -> Vec<f64>,
        t0: f64,
        t1: f64,
        y0: &[f64],
    ) -> Result<Vec<f64>> {
        if !(t1 >= t0) {
            return Err(Error::InvalidArgument(format!("need t1 >= t0, got {t0}..{t1}")));
        }
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = t0;
        if t1 == t0 {
            return Ok(y);
        }
        let mut h = ((t1 - t0) * 1e-3).min(1e-2);
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        let mut steps = 0;
        k[0] = f(t, &y);
        while t < t1 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::NoConvergence {
                    iterations: self.max_steps,
                    residual: t1 - t,
                });
            }
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            for s in 1..7 {
                let ys: Vec<f64> = (0..n)
                    .map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
                    .collect();
                k[s] = f(t + C[s] * h, &ys);
            }
            let y5: Vec<f64> = (0..n)
                .map(|i| y[i] + h * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>())
                .collect();
            let err = (0..n)
                .map(|i| {
                    let e = h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
                    let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / n as f64;
            let err = err.sqrt();
            if !err.is_finite() {
                return Err(Error::NonFinite("reference integration"));
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y = y5;
                // First-same-as-last.
                k[0] = k[6].clone();
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        }
        Ok(y)
    }
}

/// Closed-form `(q(t), p(t))` for `H = p^2/(2m) + k q^2/2`.
pub fn harmonic_solution(m: f64, k: f64, z0: &PhaseVector, t: f64) -> PhaseVector {
    let w = (k / m).sqrt();
    let (q0, v0) = (z0.q()[0], z0.p()[0] / m);
    let (c, s) = ((w * t).cos(), (w * t).sin());
    let q = q0 * c + v0 / w * s;
    let v = -q0 * w * s + v0 * c;
    PhaseVector::scalar(q, m * v)
}

/// End state and accumulated dissipation of a reference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub state: PhaseVector,
    pub dissipation: f64,
}

/// `m q'' + c q' + k q = 0` by [`Dopri5`], with the dissipation `int c q'^2`
/// carried as an extra state.
pub fn damped_oscillator_reference(m: f64, k: f64, c: f64, z0: &PhaseVector, t_end: f64) -> Result<ReferenceSolution> {
    let y = Dopri5::default().integrate(
        |_, y| {
            let v = y[1] / m;
            vec![v, -k * y[0] - c * v, c * v * v]
        },
        0.0,
        t_end,
        &[z0.q()[0], z0.p()[0], 0.0],
    )?;
    Ok(ReferenceSolution {
        state: PhaseVector::scalar(y[0], y[1]),
        dissipation: y[2],
    })
}

/// Free motion of `m x'' + mu x' + k x = 0` from `(x0, v0)`, in closed form.
#[derive(Debug, Clone, Copy)]
struct LinearPhase {
    alpha: f64,
    kind: Damping,
    x0: f64,
    v0: f64,
}

#[derive(Debug, Clone, Copy)]
enum Damping {
    Under { wd: f64 },
    Critical,
    Over { r1: f64, r2: f64 },
}

impl LinearPhase {
    fn new(m: f64, k: f64, mu: f64, x0: f64, v0: f64) -> Self {
        let alpha = mu / (2.0 * m);
        let w0sq = k / m;
        let disc = alpha * alpha - w0sq;
        let kind = if disc < -1e-14 * w0sq.max(1e-300) {
            Damping::Under { wd: (-disc).sqrt() }
        } else if disc > 1e-14 * w0sq.max(1e-300) {
            let sq = disc.sqrt();
            Damping::Over {
                r1: -alpha + sq,
                r2: -alpha - sq,
            }
        } else {
            Damping::Critical
        };
        Self { alpha, kind, x0, v0 }
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let (x0, v0, a) = (self.x0, self.v0, self.alpha);
        match self.kind {
            Damping::Under { wd } => {
                let e = (-a * t).exp();
                let (c, s) = ((wd * t).cos(), (wd * t).sin());
                let b = (v0 + a * x0) / wd;
                let x = e * (x0 * c + b * s);
                let v = e * ((-a * x0 + wd * b) * c + (-a * b - wd * x0) * s);
                (x, v)
            }
            Damping::Critical => {
                let e = (-a * t).exp();
                let b = v0 + a * x0;
                (e * (x0 + b * t), e * (b - a * (x0 + b * t)))
            }
            Damping::Over { r1, r2 } => {
                let c1 = (v0 - r2 * x0) / (r1 - r2);
                let c2 = x0 - c1;
                let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
                (c1 * e1 + c2 * e2, c1 * r1 * e1 + c2 * r2 * e2)
            }
        }
    }

    /// First `t` in `(0, horizon]` where the velocity changes sign.
    fn first_stop(&self, horizon: f64) -> Option<f64> {
        let v_at = |t: f64| self.eval(t).1;
        let s0 = self.v0.signum();
        let dt = match self.kind {
            Damping::Under { wd } => (1e-2 / wd).min(1e-2),
            _ => 1e-2,
        };
        let mut a = 0.0;
        while a < horizon {
            let b = (a + dt).min(horizon);
            if v_at(b) * s0 <= 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if v_at(mid) * s0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * hi.max(1.0) {
                        break;
                    }
                }
                return Some(hi);
            }
            a = b;
        }
        None
    }
}

/// `m q'' + mu q' + sigma Sign(q') + k q = 0`, solved phase by phase.
///
/// Slip phases are linear oscillations about the shifted rest point
/// `-sigma s / k`; a phase ends when the velocity vanishes, after which the
/// mass sticks if `|k q| <= sigma` and slips the other way otherwise.
pub fn stick_slip_reference(
    m: f64,
    k: f64,
    sigma: f64,
    mu: f64,
    z0: &PhaseVector,
    t_end: f64,
) -> Result<ReferenceSolution> {
    if !(m > 0.0 && k > 0.0 && sigma >= 0.0 && mu >= 0.0) {
        return Err(Error::InvalidArgument("stick-slip reference needs m, k > 0 and sigma, mu >= 0".into()));
    }
    let (mut q, mut v) = (z0.q()[0], z0.p()[0] / m);
    let mut t = 0.0;
    let mut diss = 0.0;
    while t < t_end {
        let s = if v != 0.0 {
            v.signum()
        } else if (k * q).abs() <= sigma {
            // Sticks for the rest of the run.
            break;
        } else {
            -(k * q).signum()
        };
        let centre = -sigma * s / k;
        let phase = LinearPhase::new(m, k, mu, q - centre, v);
        let horizon = t_end - t;
        let stop = if v == 0.0 {
            // Leaving rest: skip the initial zero of the velocity.
            let eps = 1e-12 * horizon.max(1.0);
            let shifted = {
                let (x, w) = phase.eval(eps);
                LinearPhase::new(m, k, mu, x, w)
            };
            shifted.first_stop(horizon - eps).map(|d| d + eps)
        } else {
            phase.first_stop(horizon)
        };
        let dur = stop.unwrap_or(horizon);
        let (x1, v1) = phase.eval(dur);
        let q1 = x1 + centre;
        diss += sigma * (q1 - q).abs();
        if mu > 0.0 {
            // Simpson on the smooth phase velocity.
            let n = 2 * ((dur / 1e-4).ceil() as usize).max(1);
            let hh = dur / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let vi = phase.eval(i as f64 * hh).1;
                acc += w * vi * vi;
            }
            diss += mu * acc * hh / 3.0;
        }
        q = q1;
        v = if stop.is_some() { 0.0 } else { v1 };
        t += dur;
    }
    Ok(ReferenceSolution {
        state: PhaseVector::scalar(q, m * v),
        dissipation: diss,
    })
}
