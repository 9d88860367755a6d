use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::PhaseVector;

type ScalarFn = dyn Fn(&PhaseVector, f64) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&PhaseVector, f64) -> Vec<f64> + Send + Sync;

/// Step used when `dH/dt` has to be estimated by central differences.
pub const DT_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianDescriptor {
    Quadratic,
    Library(String),
    Custom,
}

/// `H(z, t)` with its partial derivatives.
#[derive(Clone)]
pub struct Hamiltonian {
    n: usize,
    descriptor: HamiltonianDescriptor,
    value: Arc<ScalarFn>,
    grad_q: Arc<VectorFn>,
    grad_p: Arc<VectorFn>,
    dt_partial: Option<Arc<ScalarFn>>,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("n", &self.n)
            .field("descriptor", &self.descriptor)
            .field("dt_partial", &self.dt_partial.is_some())
            .finish()
    }
}

fn zero_dt() -> Option<Arc<ScalarFn>> {
    Some(Arc::new(|_: &PhaseVector, _: f64| 0.0))
}

impl Hamiltonian {
    /// `1/2 z^T S z + <b, z> + c` for a symmetric `2n x 2n` matrix `S`.
    pub fn quadratic(s: DMatrix<f64>, b: PhaseVector, c: f64) -> Result<Self> {
        let n = b.half_dim();
        if s.nrows() != 2 * n || s.ncols() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.nrows() / 2,
            });
        }
        if s.iter().any(|x| !x.is_finite()) || !b.is_finite() || !c.is_finite() {
            return Err(Error::NonFinite("quadratic Hamiltonian"));
        }
        let asym = (&s - s.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + s.abs().max()) {
            return Err(Error::InvalidArgument(format!(
                "Hamiltonian matrix is not symmetric (defect {asym:e})"
            )));
        }
        let s = Arc::new(s);
        let bf = Arc::new(DVector::from_vec(b.to_flat()));
        let grad = {
            let s = s.clone();
            let bf = bf.clone();
            move |z: &PhaseVector| -> Vec<f64> {
                let x = DVector::from_vec(z.to_flat());
                (&*s * x + &*bf).as_slice().to_vec()
            }
        };
        let grad = Arc::new(grad);
        let gq = grad.clone();
        let gp = grad.clone();
        Ok(Self {
            n,
            descriptor: HamiltonianDescriptor::Quadratic,
            value: Arc::new(move |z: &PhaseVector, _t: f64| {
                let x = DVector::from_vec(z.to_flat());
                0.5 * x.dot(&(&*s * &x)) + bf.dot(&x) + c
            }),
            grad_q: Arc::new(move |z: &PhaseVector, _t: f64| gq(z)[..z.half_dim()].to_vec()),
            grad_p: Arc::new(move |z: &PhaseVector, _t: f64| gp(z)[z.half_dim()..].to_vec()),
            dt_partial: zero_dt(),
        })
    }

    /// `p^2/(2m) + k q^2/2` in one degree of freedom.
    pub fn oscillator(m: f64, k: f64) -> Result<Self> {
        if !(m > 0.0) || !(k >= 0.0) || !m.is_finite() || !k.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "oscillator needs m > 0 and k >= 0 (got m={m}, k={k})"
            )));
        }
        Self::quadratic(
            DMatrix::from_diagonal(&DVector::from_vec(vec![k, 1.0 / m])),
            PhaseVector::zeros(1),
            0.0,
        )
    }

    /// `|p|^2/(2m)`.
    pub fn free_particle(n: usize, m: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidArgument(format!("mass must be > 0, got {m}")));
        }
        let mut d = vec![0.0; 2 * n];
        d[n..].iter_mut().for_each(|x| *x = 1.0 / m);
        Self::quadratic(DMatrix::from_diagonal(&DVector::from_vec(d)), PhaseVector::zeros(n), 0.0)
    }

    /// `<a, q>`.
    pub fn linear_q(a: Vec<f64>) -> Result<Self> {
        let n = a.len();
        let b = PhaseVector::new(a, vec![0.0; n])?;
        Self::quadratic(DMatrix::zeros(2 * n, 2 * n), b, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Self::quadratic(DMatrix::zeros(2 * n, 2 * n), PhaseVector::zeros(n), c)
    }

    /// `p^2/(2m) + k q^2/2 - F q sin(W t)`: a driven oscillator, time dependent.
    pub fn forced_oscillator(m: f64, k: f64, force: f64, freq: f64) -> Result<Self> {
        let base = Self::oscillator(m, k)?;
        let (v, gq, gp) = (base.value.clone(), base.grad_q.clone(), base.grad_p.clone());
        Ok(Self {
            n: 1,
            descriptor: HamiltonianDescriptor::Library("forced_oscillator".into()),
            value: Arc::new(move |z, t| v(z, t) - force * z.q()[0] * (freq * t).sin()),
            grad_q: Arc::new(move |z, t| vec![gq(z, t)[0] - force * (freq * t).sin()]),
            grad_p: gp,
            dt_partial: Some(Arc::new(move |z, t| -force * freq * z.q()[0] * (freq * t).cos())),
        })
    }

    /// Arbitrary `H`. Without [`Hamiltonian::with_dt_partial`] the time
    /// derivative falls back to central differences.
    pub fn custom(
        n: usize,
        value: impl Fn(&PhaseVector, f64) -> f64 + Send + Sync + 'static,
        grad_q: impl Fn(&PhaseVector, f64) -> Vec<f64> + Send + Sync + 'static,
        grad_p: impl Fn(&PhaseVector, f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            n,
            descriptor: HamiltonianDescriptor::Custom,
            value: Arc::new(value),
            grad_q: Arc::new(grad_q),
            grad_p: Arc::new(grad_p),
            dt_partial: None,
        })
    }

    pub fn with_dt_partial(mut self, dt: impl Fn(&PhaseVector, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dt_partial = Some(Arc::new(dt));
        self
    }

    /// Declares `dH/dt = 0`.
    pub fn autonomous(mut self) -> Self {
        self.dt_partial = zero_dt();
        self
    }

    pub fn with_descriptor(mut self, descriptor: HamiltonianDescriptor) -> Self {
        self.descriptor = descriptor;
        self
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn descriptor(&self) -> &HamiltonianDescriptor {
        &self.descriptor
    }

    /// True when `dH/dt` is estimated numerically.
    pub fn dt_is_estimated(&self) -> bool {
        self.dt_partial.is_none()
    }

    pub fn value(&self, z: &PhaseVector, t: f64) -> Result<f64> {
        z.ensure_dim(self.n)?;
        Ok(self.value_unchecked(z, t))
    }

    pub(crate) fn value_unchecked(&self, z: &PhaseVector, t: f64) -> f64 {
        (self.value)(z, t)
    }

    pub fn grad_q(&self, z: &PhaseVector, t: f64) -> Result<Vec<f64>> {
        z.ensure_dim(self.n)?;
        self.checked_block(&self.grad_q, z, t)
    }

    pub fn grad_p(&self, z: &PhaseVector, t: f64) -> Result<Vec<f64>> {
        z.ensure_dim(self.n)?;
        self.checked_block(&self.grad_p, z, t)
    }

    fn checked_block(&self, f: &Arc<VectorFn>, z: &PhaseVector, t: f64) -> Result<Vec<f64>> {
        let g = f(z, t);
        if g.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: g.len(),
            });
        }
        Ok(g)
    }

    /// Full gradient `(dH/dq, dH/dp)`.
    pub fn gradient(&self, z: &PhaseVector, t: f64) -> Result<PhaseVector> {
        let g = PhaseVector::new(self.grad_q(z, t)?, self.grad_p(z, t)?)?;
        g.ensure_finite("Hamiltonian gradient")?;
        Ok(g)
    }

    /// `dH/dt`, by central differences with step [`DT_FD_STEP`] when no
    /// closure was supplied.
    pub fn dt_partial(&self, z: &PhaseVector, t: f64) -> Result<f64> {
        z.ensure_dim(self.n)?;
        let v = match &self.dt_partial {
            Some(f) => f(z, t),
            None => {
                let h = DT_FD_STEP;
                ((self.value)(z, t + h) - (self.value)(z, t - h)) / (2.0 * h)
            }
        };
        if !v.is_finite() {
            return Err(Error::NonFinite("dH/dt"));
        }
        Ok(v)
    }
}

/// `X_H = (dH/dp, -dH/dq)`.
pub fn symplectic_gradient(h: &Hamiltonian, z: &PhaseVector, t: f64) -> Result<PhaseVector> {
    let q = h.grad_q(z, t)?;
    let p = h.grad_p(z, t)?;
    let x = PhaseVector::new(p, q.into_iter().map(|x| -x).collect())?;
    x.ensure_finite("symplectic gradient")?;
    Ok(x)
}

const REVERSIBLE_TOL: f64 = 1e-12;
const REVERSIBLE_MAX_ITER: usize = 100;

/// Forward-difference Jacobian of `f` at `x`, by columns.
pub(crate) fn fd_jacobian(
    f: &mut dyn FnMut(&PhaseVector) -> Result<PhaseVector>,
    x: &PhaseVector,
    fx: &PhaseVector,
    rel: f64,
) -> Result<DMatrix<f64>> {
    let m = 2 * x.half_dim();
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let e = rel * x.get(j).abs().max(1.0);
        let mut xe = x.clone();
        xe.set(j, x.get(j) + e);
        let fe = f(&xe)?;
        for i in 0..m {
            jac[(i, j)] = (fe.get(i) - fx.get(i)) / e;
        }
    }
    Ok(jac)
}

/// One implicit-midpoint step of `z' = X_H(z, t)`.
///
/// Newton on `v - X_H(z + h v / 2, t + h / 2) = 0` for the rate `v`, with a
/// finite-difference Jacobian; falls back to a fixed-point update when the
/// linear solve fails.
pub fn step_reversible(ham: &Hamiltonian, z: &PhaseVector, t: f64, h: f64) -> Result<PhaseVector> {
    let v = reversible_rate(ham, z, t, h)?;
    Ok(z.axpy(h, &v))
}

pub(crate) fn reversible_rate(ham: &Hamiltonian, z: &PhaseVector, t: f64, h: f64) -> Result<PhaseVector> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step size must be > 0, got {h}")));
    }
    z.ensure_dim(ham.half_dim())?;
    z.ensure_finite("state")?;
    let tm = t + 0.5 * h;
    let mut residual_of = |v: &PhaseVector| -> Result<PhaseVector> {
        let x = symplectic_gradient(ham, &z.axpy(0.5 * h, v), tm)?;
        Ok(v - &x)
    };
    let mut v = symplectic_gradient(ham, z, t)?;
    let mut r = residual_of(&v)?;
    let mut last = f64::INFINITY;
    for _ in 0..REVERSIBLE_MAX_ITER {
        last = r.norm_inf();
        if last <= REVERSIBLE_TOL * v.norm_inf().max(1.0) {
            return Ok(v);
        }
        let jac = fd_jacobian(&mut residual_of, &v, &r, 1e-7)?;
        let rhs = DVector::from_vec(r.to_flat());
        let next = match jac.lu().solve(&rhs) {
            Some(d) if d.iter().all(|x| x.is_finite()) => v.zip_with(&PhaseVector::from_flat(d.as_slice())?, |a, b| a - b),
            _ => &v - &r,
        };
        let rn = residual_of(&next)?;
        if rn.norm_inf() >= last {
            // Newton with an approximate Jacobian stalled; take a fixed-point step.
            let fp = &v - &r;
            let rf = residual_of(&fp)?;
            if rf.norm_inf() >= last {
                break;
            }
            v = fp;
            r = rf;
        } else {
            v = next;
            r = rn;
        }
    }
    last = last.min(r.norm_inf());
    if last <= REVERSIBLE_TOL * v.norm_inf().max(1.0) {
        return Ok(v);
    }
    Err(Error::NoConvergence {
        iterations: REVERSIBLE_MAX_ITER,
        residual: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> Hamiltonian {
        Hamiltonian::oscillator(1.0, 1.0).unwrap()
    }

    #[test]
    fn symplectic_gradient_examples() {
        let x = symplectic_gradient(&harmonic(), &PhaseVector::scalar(1.0, 2.0), 0.0).unwrap();
        assert_eq!(x.to_flat(), vec![2.0, -1.0]);
        let lin = Hamiltonian::linear_q(vec![3.0]).unwrap();
        let x = symplectic_gradient(&lin, &PhaseVector::scalar(-4.0, 0.5), 1.0).unwrap();
        assert_eq!(x.to_flat(), vec![0.0, -3.0]);
        let c = Hamiltonian::constant(2, 7.0).unwrap();
        let x = symplectic_gradient(&c, &PhaseVector::from_flat(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0).unwrap();
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let h = Hamiltonian::custom(1, |_, _| 0.0, |_, _| vec![f64::NAN], |_, _| vec![0.0]).unwrap();
        assert!(symplectic_gradient(&h, &PhaseVector::scalar(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn midpoint_conserves_oscillator_energy() {
        let h = harmonic();
        let mut z = PhaseVector::scalar(1.0, 0.0);
        let mut drift: f64 = 0.0;
        for k in 0..10_000 {
            z = step_reversible(&h, &z, k as f64 * 1e-3, 1e-3).unwrap();
            drift = drift.max((h.value(&z, 0.0).unwrap() - 0.5).abs());
        }
        assert!(drift <= 1e-6, "drift {drift:e}");
        assert!((z.q()[0] - 10f64.cos()).abs() < 1e-5);
        assert!((z.p()[0] + 10f64.sin()).abs() < 1e-5);
    }

    #[test]
    fn free_particle_is_exact() {
        let h = Hamiltonian::free_particle(1, 1.0).unwrap();
        let mut z = PhaseVector::scalar(0.0, 1.0);
        for k in 1..=100 {
            z = step_reversible(&h, &z, 0.0, 0.01).unwrap();
            assert!((z.q()[0] - k as f64 * 0.01).abs() < 1e-13);
            assert_eq!(z.p()[0], 1.0);
        }
    }

    #[test]
    fn small_steps_move_little() {
        let h = harmonic();
        let z = PhaseVector::scalar(0.3, -0.7);
        let x = symplectic_gradient(&h, &z, 0.0).unwrap();
        for &dt in &[1e-2, 1e-4, 1e-6] {
            let next = step_reversible(&h, &z, 0.0, dt).unwrap();
            assert!((&next - &z).norm() <= x.norm() * dt + 10.0 * dt * dt);
        }
    }

    #[test]
    fn nonlinear_pendulum_step_converges() {
        let h = Hamiltonian::custom(
            1,
            |z, _| 0.5 * z.p()[0].powi(2) - z.q()[0].cos(),
            |z, _| vec![z.q()[0].sin()],
            |z, _| vec![z.p()[0]],
        )
        .unwrap()
        .autonomous();
        let z = PhaseVector::scalar(2.5, 0.4);
        let next = step_reversible(&h, &z, 0.0, 0.1).unwrap();
        let mid = &(&z + &next).scale(0.5);
        let x = symplectic_gradient(&h, mid, 0.05).unwrap();
        let defect = &(&next - &z).scale(10.0) - &x;
        assert!(defect.norm_inf() < 1e-11);
    }

    #[test]
    fn dt_partial_closed_form_and_fallback() {
        let f = Hamiltonian::forced_oscillator(1.0, 1.0, 0.7, 2.0).unwrap();
        let z = PhaseVector::scalar(0.4, 0.1);
        let exact = f.dt_partial(&z, 0.3).unwrap();
        assert!((exact - (-0.7 * 2.0 * 0.4 * 0.6f64.cos())).abs() < 1e-14);
        let v = f.value.clone();
        let g = Hamiltonian::custom(1, move |z, t| v(z, t), |_, _| vec![0.0], |_, _| vec![0.0]).unwrap();
        assert!(g.dt_is_estimated());
        assert!((g.dt_partial(&z, 0.3).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn quadratic_rejects_bad_input() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(Hamiltonian::quadratic(s, PhaseVector::zeros(1), 0.0).is_err());
        assert!(Hamiltonian::oscillator(0.0, 1.0).is_err());
        assert!(step_reversible(&harmonic(), &PhaseVector::scalar(1.0, 0.0), 0.0, 0.0).is_err());
    }
}
