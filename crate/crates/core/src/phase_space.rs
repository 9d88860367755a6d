//! Phase space `Q x P = R^n x R^n` with the canonical symplectic form.
//!
//! The form is `omega((q1, p1), (q2, p2)) = <q1, p2> - <p1, q2>` and the
//! matrix `J(q, p) = (-p, q)` satisfies `<J z1, z2> = omega(z1, z2)`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point, rate or gap vector in phase space, stored as two blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPhaseVector")]
pub struct PhaseVector {
    q: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPhaseVector {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl TryFrom<RawPhaseVector> for PhaseVector {
    type Error = Error;

    fn try_from(raw: RawPhaseVector) -> Result<Self> {
        PhaseVector::new(raw.q, raw.p)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

impl PhaseVector {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::BlockMismatch {
                q: q.len(),
                p: p.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { q, p })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "half-dimension must be at least 1");
        Self {
            q: vec![0.0; n],
            p: vec![0.0; n],
        }
    }

    /// Single-degree-of-freedom shorthand.
    pub fn scalar(q: f64, p: f64) -> Self {
        Self { q: vec![q], p: vec![p] }
    }

    /// Builds from `[q..., p...]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "flat phase vector needs even length, got {}",
                flat.len()
            )));
        }
        let n = flat.len() / 2;
        Self::new(flat[..n].to_vec(), flat[n..].to_vec())
    }

    /// Unit basis vector `e_i` of `R^{2n}` in flat ordering.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut flat = vec![0.0; 2 * n];
        flat[i] = 1.0;
        Self::from_flat(&flat).expect("basis index within range")
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.q.len());
        out.extend_from_slice(&self.q);
        out.extend_from_slice(&self.p);
        out
    }

    pub fn half_dim(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    /// Component `i` of the flat representation.
    pub fn get(&self, i: usize) -> f64 {
        let n = self.q.len();
        if i < n {
            self.q[i]
        } else {
            self.p[i - n]
        }
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let n = self.q.len();
        if i < n {
            self.q[i] = value;
        } else {
            self.p[i - n] = value;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn ensure_dim(&self, n: usize) -> Result<()> {
        if self.half_dim() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                found: self.half_dim(),
            })
        }
    }

    /// Euclidean inner product on `R^{2n}`.
    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.q, &other.q) + dot(&self.p, &other.p)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.q
            .iter()
            .chain(&self.p)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            q: self.q.iter().map(|&x| f(x)).collect(),
            p: self.p.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.half_dim(), other.half_dim());
        Self {
            q: self.q.iter().zip(&other.q).map(|(&a, &b)| f(a, b)).collect(),
            p: self.p.iter().zip(&other.p).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl Add for &PhaseVector {
    type Output = PhaseVector;
    fn add(self, rhs: &PhaseVector) -> PhaseVector {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PhaseVector {
    type Output = PhaseVector;
    fn sub(self, rhs: &PhaseVector) -> PhaseVector {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &PhaseVector {
    type Output = PhaseVector;
    fn neg(self) -> PhaseVector {
        self.map(|a| -a)
    }
}

impl Mul<&PhaseVector> for f64 {
    type Output = PhaseVector;
    fn mul(self, rhs: &PhaseVector) -> PhaseVector {
        rhs.scale(self)
    }
}

/// The dualities a bipotential can be relative to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualityKind {
    Symplectic,
    EuclideanInner,
    Zero,
}

impl DualityKind {
    pub const ALL: [DualityKind; 3] = [
        DualityKind::Symplectic,
        DualityKind::EuclideanInner,
        DualityKind::Zero,
    ];

    /// `D` with `d(z1, z2) = <D z1, z2>`.
    pub(crate) fn left_operator(self, z: &PhaseVector) -> PhaseVector {
        match self {
            DualityKind::Symplectic => j_apply(z),
            DualityKind::EuclideanInner => z.clone(),
            DualityKind::Zero => PhaseVector::zeros(z.half_dim()),
        }
    }

    pub(crate) fn eval_unchecked(self, z1: &PhaseVector, z2: &PhaseVector) -> f64 {
        match self {
            DualityKind::Symplectic => omega_unchecked(z1, z2),
            DualityKind::EuclideanInner => z1.dot(z2),
            DualityKind::Zero => 0.0,
        }
    }
}

pub(crate) fn omega_unchecked(z1: &PhaseVector, z2: &PhaseVector) -> f64 {
    dot(&z1.q, &z2.p) - dot(&z1.p, &z2.q)
}

pub(crate) fn j_apply(z: &PhaseVector) -> PhaseVector {
    PhaseVector {
        q: z.p.iter().map(|x| -x).collect(),
        p: z.q.clone(),
    }
}

/// Canonical symplectic structure on `R^n x R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymplecticStructure {
    n: usize,
}

impl SymplecticStructure {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { n })
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    fn check(&self, z: &PhaseVector) -> Result<()> {
        z.ensure_dim(self.n)
    }

    pub fn omega(&self, z1: &PhaseVector, z2: &PhaseVector) -> Result<f64> {
        self.check(z1)?;
        self.check(z2)?;
        Ok(omega_unchecked(z1, z2))
    }

    /// `(q, p) -> (-p, q)`
    pub fn j_map(&self, z: &PhaseVector) -> Result<PhaseVector> {
        self.check(z)?;
        Ok(j_apply(z))
    }

    pub fn duality_eval(
        &self,
        kind: DualityKind,
        z1: &PhaseVector,
        z2: &PhaseVector,
    ) -> Result<f64> {
        self.check(z1)?;
        self.check(z2)?;
        Ok(kind.eval_unchecked(z1, z2))
    }
}

/// Free-standing duality evaluation; only the two vectors need to agree.
pub fn duality_eval(kind: DualityKind, z1: &PhaseVector, z2: &PhaseVector) -> Result<f64> {
    z2.ensure_dim(z1.half_dim())?;
    Ok(kind.eval_unchecked(z1, z2))
}
