//! Convex lsc extended-real functions on phase space.
//!
//! The classical subdifferential and conjugate use the Euclidean inner product
//! on `R^{2n}`; the symplectic notions are reached through `J`:
//! `F^{*w}(z') = F^*(J z')` and `z' in X F(z)` iff `J z' in dF(z)`.

use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::phase_space::{j_apply, omega_unchecked, PhaseVector, SymplecticStructure};
use crate::sampling::DirectionSampler;

/// Feasibility slack used by every indicator in the library.
pub const FEAS_TOL: f64 = 1e-9;

/// A real number or `+inf`. Never NaN, never `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedReal(f64);

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal(0.0);
    pub const INFINITY: ExtendedReal = ExtendedReal(f64::INFINITY);

    pub fn new(x: f64) -> Result<Self> {
        if x.is_nan() || x == f64::NEG_INFINITY {
            Err(Error::NonFinite("extended real"))
        } else {
            Ok(Self(x))
        }
    }

    /// For values produced by library formulas that cannot be NaN.
    pub(crate) fn of(x: f64) -> Self {
        debug_assert!(!x.is_nan() && x != f64::NEG_INFINITY, "bad extended real {x}");
        Self(x)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn finite(self) -> Option<f64> {
        self.0.is_finite().then_some(self.0)
    }

    /// `self - rhs`, rejecting `(+inf) - (+inf)` and `finite - (+inf)`.
    pub fn checked_sub(self, rhs: ExtendedReal) -> Result<ExtendedReal> {
        match (self.is_finite(), rhs.is_finite()) {
            (_, true) => Ok(Self(self.0 - rhs.0)),
            (false, false) => Err(Error::InfiniteDifference),
            (true, false) => Err(Error::InvalidArgument(
                "finite - (+inf) leaves the extended reals".into(),
            )),
        }
    }

    /// `self - x` for finite `x`; `+inf` stays `+inf`.
    pub fn sub_real(self, x: f64) -> ExtendedReal {
        Self::of(self.0 - x)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        if !self.is_finite() || !rhs.is_finite() {
            Self::INFINITY
        } else {
            Self(self.0 + rhs.0)
        }
    }
}

impl Add<f64> for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: f64) -> ExtendedReal {
        self + ExtendedReal::of(rhs)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "{}", self.0)
        } else {
            f.write_str("inf")
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_ext::serialize_f64_or_inf(&self.0, serializer)
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let x = crate::serde_ext::deserialize_f64_or_inf(deserializer)?;
        ExtendedReal::new(x).map_err(serde::de::Error::custom)
    }
}

/// Closed convex sets used by support functions.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    Box { lower: PhaseVector, upper: PhaseVector },
    Ball { center: PhaseVector, radius: f64 },
}

impl ConvexSet {
    fn half_dim(&self) -> usize {
        match self {
            ConvexSet::Box { lower, .. } => lower.half_dim(),
            ConvexSet::Ball { center, .. } => center.half_dim(),
        }
    }

    fn contains(&self, y: &PhaseVector) -> bool {
        match self {
            ConvexSet::Box { lower, upper } => (0..2 * lower.half_dim()).all(|i| {
                let v = y.get(i);
                v >= lower.get(i) - FEAS_TOL && v <= upper.get(i) + FEAS_TOL
            }),
            ConvexSet::Ball { center, radius } => (y - center).norm() <= radius + FEAS_TOL,
        }
    }

    fn project(&self, y: &PhaseVector) -> PhaseVector {
        match self {
            ConvexSet::Box { lower, upper } => {
                let mut out = y.clone();
                for i in 0..2 * y.half_dim() {
                    out.set(i, y.get(i).clamp(lower.get(i), upper.get(i)));
                }
                out
            }
            ConvexSet::Ball { center, radius } => {
                let d = y - center;
                let r = d.norm();
                if r <= *radius {
                    y.clone()
                } else {
                    center.axpy(radius / r, &d)
                }
            }
        }
    }

    /// `sup_{c in C} <c, z>` together with a maximiser.
    fn support(&self, z: &PhaseVector) -> (f64, PhaseVector) {
        match self {
            ConvexSet::Box { lower, upper } => {
                let mut arg = lower.clone();
                let mut value = 0.0;
                for i in 0..2 * z.half_dim() {
                    let c = if z.get(i) >= 0.0 { upper.get(i) } else { lower.get(i) };
                    arg.set(i, c);
                    value += c * z.get(i);
                }
                (value, arg)
            }
            ConvexSet::Ball { center, radius } => {
                let r = z.norm();
                let arg = if r > 0.0 {
                    center.axpy(radius / r, z)
                } else {
                    center.clone()
                };
                (center.dot(z) + radius * r, arg)
            }
        }
    }
}

type EvalFn = dyn Fn(&PhaseVector) -> ExtendedReal + Send + Sync;
type VectorFn = dyn Fn(&PhaseVector) -> Option<PhaseVector> + Send + Sync;
type ProxFn = dyn Fn(&PhaseVector, f64) -> PhaseVector + Send + Sync;

/// A user-supplied convex function. The caller vouches for convexity.
#[derive(Clone)]
pub struct CustomFunction {
    pub name: String,
    eval: Arc<EvalFn>,
    subgradient: Option<Arc<VectorFn>>,
    conjugate: Option<Arc<EvalFn>>,
    prox: Option<Arc<ProxFn>>,
}

impl fmt::Debug for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFunction")
            .field("name", &self.name)
            .field("subgradient", &self.subgradient.is_some())
            .field("conjugate", &self.conjugate.is_some())
            .field("prox", &self.prox.is_some())
            .finish()
    }
}

/// Structured tag of a library function.
#[derive(Debug, Clone)]
pub enum Descriptor {
    /// `z^T A z / 2 + <b, z> + c`, `A` symmetric positive semidefinite in
    /// flat `(q, p)` coordinates.
    Quadratic { a: DMatrix<f64>, b: PhaseVector, c: f64 },
    /// `|W z|_2` with `W = diag(weights)`, weights nonnegative.
    WeightedNorm { weights: PhaseVector },
    /// Indicator of the centred Euclidean ball of the given radius.
    IndicatorBall { radius: f64 },
    IndicatorPoint { point: PhaseVector },
    SupportFunction { set: ConvexSet },
    Scaled { factor: f64, inner: Box<ConvexFunction> },
    Sum(Vec<ConvexFunction>),
    Custom(CustomFunction),
}

#[derive(Debug, Clone)]
struct Eigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

/// Convex lsc function `R^{2n} -> R u {+inf}` backed by a closed-form
/// descriptor.
#[derive(Debug, Clone)]
pub struct ConvexFunction {
    n: usize,
    descriptor: Descriptor,
    eigen: Option<Arc<Eigen>>,
}

fn to_dvector(z: &PhaseVector) -> DVector<f64> {
    DVector::from_vec(z.to_flat())
}

fn from_dvector(v: &DVector<f64>) -> PhaseVector {
    PhaseVector::from_flat(v.as_slice()).expect("even length")
}

fn eig_tol(values: &DVector<f64>) -> f64 {
    1e-10 * values.iter().fold(1.0_f64, |m, x| m.max(x.abs()))
}

impl ConvexFunction {
    fn plain(n: usize, descriptor: Descriptor) -> Self {
        Self {
            n,
            descriptor,
            eigen: None,
        }
    }

    pub fn quadratic(a: DMatrix<f64>, b: PhaseVector, c: f64) -> Result<Self> {
        let n = b.half_dim();
        if a.nrows() != 2 * n || a.ncols() != 2 * n {
            return Err(Error::InvalidArgument(format!(
                "quadratic matrix must be {0}x{0}, got {1}x{2}",
                2 * n,
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) || !b.is_finite() || !c.is_finite() {
            return Err(Error::NonFinite("quadratic coefficients"));
        }
        let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if (&a - a.transpose()).iter().any(|x| x.abs() > 1e-12 * scale) {
            return Err(Error::InvalidArgument("quadratic matrix is not symmetric".into()));
        }
        let a = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(a.clone());
        let tol = eig_tol(&eig.eigenvalues);
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -tol {
                return Err(Error::InvalidArgument(format!(
                    "quadratic matrix is not positive semidefinite (eigenvalue {min:e})"
                )));
            }
        }
        Ok(Self {
            n,
            descriptor: Descriptor::Quadratic { a, b, c },
            eigen: Some(Arc::new(Eigen {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            })),
        })
    }

    /// `A = diag(diag)`, `b = 0`, `c = 0`.
    pub fn diagonal_quadratic(diag: &PhaseVector) -> Result<Self> {
        let a = DMatrix::from_diagonal(&to_dvector(diag));
        Self::quadratic(a, PhaseVector::zeros(diag.half_dim()), 0.0)
    }

    /// `|z|^2 / 2`
    pub fn half_squared_norm(n: usize) -> Self {
        Self::quadratic(DMatrix::identity(2 * n, 2 * n), PhaseVector::zeros(n), 0.0)
            .expect("identity is positive definite")
    }

    /// `<a, z>`
    pub fn linear(a: PhaseVector) -> Result<Self> {
        let n = a.half_dim();
        Self::quadratic(DMatrix::zeros(2 * n, 2 * n), a, 0.0)
    }

    pub fn zero(n: usize) -> Self {
        Self::linear(PhaseVector::zeros(n)).expect("zero is convex")
    }

    pub fn weighted_norm(weights: PhaseVector) -> Result<Self> {
        if !weights.is_finite() || weights.to_flat().iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument(
                "norm weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self::plain(weights.half_dim(), Descriptor::WeightedNorm { weights }))
    }

    pub fn euclidean_norm(n: usize) -> Self {
        Self::weighted_norm(PhaseVector::zeros(n).map(|_| 1.0)).expect("unit weights")
    }

    pub fn indicator_ball(n: usize, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("ball radius {radius} must be >= 0")));
        }
        Ok(Self::plain(n, Descriptor::IndicatorBall { radius }))
    }

    pub fn indicator_point(point: PhaseVector) -> Result<Self> {
        point.ensure_finite("indicator point")?;
        Ok(Self::plain(point.half_dim(), Descriptor::IndicatorPoint { point }))
    }

    pub fn support_function(set: ConvexSet) -> Result<Self> {
        match &set {
            ConvexSet::Box { lower, upper } => {
                upper.ensure_dim(lower.half_dim())?;
                if (0..2 * lower.half_dim()).any(|i| !(lower.get(i) <= upper.get(i))) {
                    return Err(Error::InvalidArgument("box with lower > upper".into()));
                }
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::NonFinite("box bounds"));
                }
            }
            ConvexSet::Ball { center, radius } => {
                center.ensure_finite("ball center")?;
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument(format!("ball radius {radius} must be >= 0")));
                }
            }
        }
        Ok(Self::plain(set.half_dim(), Descriptor::SupportFunction { set }))
    }

    pub fn scaled(factor: f64, inner: ConvexFunction) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {factor} must be > 0")));
        }
        Ok(Self::plain(
            inner.n,
            Descriptor::Scaled {
                factor,
                inner: Box::new(inner),
            },
        ))
    }

    pub fn sum(terms: Vec<ConvexFunction>) -> Result<Self> {
        let n = terms
            .first()
            .map(|t| t.n)
            .ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
        if let Some(t) = terms.iter().find(|t| t.n != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.n,
            });
        }
        Ok(Self::plain(n, Descriptor::Sum(terms)))
    }

    /// Starts a custom function from its evaluation map.
    pub fn custom(
        n: usize,
        name: impl Into<String>,
        eval: impl Fn(&PhaseVector) -> ExtendedReal + Send + Sync + 'static,
    ) -> Self {
        Self::plain(
            n,
            Descriptor::Custom(CustomFunction {
                name: name.into(),
                eval: Arc::new(eval),
                subgradient: None,
                conjugate: None,
                prox: None,
            }),
        )
    }

    fn custom_mut(&mut self) -> &mut CustomFunction {
        match &mut self.descriptor {
            Descriptor::Custom(c) => c,
            _ => panic!("builder method only applies to custom functions"),
        }
    }

    pub fn with_subgradient(
        mut self,
        g: impl Fn(&PhaseVector) -> Option<PhaseVector> + Send + Sync + 'static,
    ) -> Self {
        self.custom_mut().subgradient = Some(Arc::new(g));
        self
    }

    pub fn with_conjugate(
        mut self,
        g: impl Fn(&PhaseVector) -> ExtendedReal + Send + Sync + 'static,
    ) -> Self {
        self.custom_mut().conjugate = Some(Arc::new(g));
        self
    }

    pub fn with_prox(
        mut self,
        g: impl Fn(&PhaseVector, f64) -> PhaseVector + Send + Sync + 'static,
    ) -> Self {
        self.custom_mut().prox = Some(Arc::new(g));
        self
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn name(&self) -> String {
        match &self.descriptor {
            Descriptor::Quadratic { .. } => "quadratic".into(),
            Descriptor::WeightedNorm { .. } => "weighted_norm".into(),
            Descriptor::IndicatorBall { .. } => "indicator_ball".into(),
            Descriptor::IndicatorPoint { .. } => "indicator_point".into(),
            Descriptor::SupportFunction { .. } => "support_function".into(),
            Descriptor::Scaled { factor, inner } => format!("{factor}*{}", inner.name()),
            Descriptor::Sum(terms) => terms
                .iter()
                .map(|t| t.name())
                .collect::<Vec<_>>()
                .join("+"),
            Descriptor::Custom(c) => c.name.clone(),
        }
    }

    fn check(&self, z: &PhaseVector) -> Result<()> {
        z.ensure_dim(self.n)
    }

    /// `f(z)`.
    pub fn evaluate(&self, z: &PhaseVector) -> Result<ExtendedReal> {
        self.check(z)?;
        Ok(self.eval(z))
    }

    pub(crate) fn eval(&self, z: &PhaseVector) -> ExtendedReal {
        match &self.descriptor {
            Descriptor::Quadratic { a, b, c } => {
                let x = to_dvector(z);
                ExtendedReal::of(0.5 * x.dot(&(a * &x)) + b.dot(z) + c)
            }
            Descriptor::WeightedNorm { weights } => {
                ExtendedReal::of(z.zip_with(weights, |x, w| x * w).norm())
            }
            Descriptor::IndicatorBall { radius } => indicator(z.norm() <= radius + FEAS_TOL),
            Descriptor::IndicatorPoint { point } => {
                indicator((z - point).norm_inf() <= FEAS_TOL)
            }
            Descriptor::SupportFunction { set } => ExtendedReal::of(set.support(z).0),
            Descriptor::Scaled { factor, inner } => {
                let v = inner.eval(z);
                if v.is_finite() {
                    ExtendedReal::of(factor * v.value())
                } else {
                    v
                }
            }
            Descriptor::Sum(terms) => terms
                .iter()
                .fold(ExtendedReal::ZERO, |acc, t| acc + t.eval(z)),
            Descriptor::Custom(c) => (c.eval)(z),
        }
    }

    /// One element of the classical subdifferential, when `f(z)` is finite
    /// and the library knows how to produce one.
    pub fn subgradient(&self, z: &PhaseVector) -> Result<Option<PhaseVector>> {
        self.check(z)?;
        if !self.eval(z).is_finite() {
            return Ok(None);
        }
        Ok(self.subgrad(z))
    }

    fn subgrad(&self, z: &PhaseVector) -> Option<PhaseVector> {
        match &self.descriptor {
            Descriptor::Quadratic { a, b, .. } => {
                Some(&from_dvector(&(a * to_dvector(z))) + b)
            }
            Descriptor::WeightedNorm { weights } => {
                let r = z.zip_with(weights, |x, w| x * w).norm();
                if r > 0.0 {
                    Some(z.zip_with(weights, |x, w| w * w * x / r))
                } else {
                    Some(PhaseVector::zeros(self.n))
                }
            }
            Descriptor::IndicatorBall { .. } | Descriptor::IndicatorPoint { .. } => {
                Some(PhaseVector::zeros(self.n))
            }
            Descriptor::SupportFunction { set } => Some(set.support(z).1),
            Descriptor::Scaled { factor, inner } => inner.subgrad(z).map(|g| g.scale(*factor)),
            Descriptor::Sum(terms) => {
                let mut acc = PhaseVector::zeros(self.n);
                for t in terms {
                    acc = &acc + &t.subgrad(z)?;
                }
                Some(acc)
            }
            Descriptor::Custom(c) => c.subgradient.as_ref().and_then(|g| g(z)),
        }
    }

    /// Closed-form classical conjugate `f^*(y) = sup_z <y, z> - f(z)`.
    pub fn conjugate(&self, y: &PhaseVector) -> Result<ExtendedReal> {
        self.check(y)?;
        self.conj(y)
    }

    fn conj(&self, y: &PhaseVector) -> Result<ExtendedReal> {
        match &self.descriptor {
            Descriptor::Quadratic { b, c, .. } => {
                let eig = self.eigen.as_ref().expect("quadratic carries its eigensystem");
                let r = to_dvector(&(y - b));
                let u = eig.vectors.transpose() * &r;
                let tol = eig_tol(&eig.values);
                let slack = FEAS_TOL * (1.0 + r.norm());
                let mut value = -c;
                for (ui, li) in u.iter().zip(eig.values.iter()) {
                    if *li > tol {
                        value += ui * ui / (2.0 * li);
                    } else if ui.abs() > slack {
                        return Ok(ExtendedReal::INFINITY);
                    }
                }
                Ok(ExtendedReal::of(value))
            }
            Descriptor::WeightedNorm { weights } => {
                Ok(indicator(weighted_dual_norm(y, weights) <= 1.0 + FEAS_TOL))
            }
            Descriptor::IndicatorBall { radius } => Ok(ExtendedReal::of(radius * y.norm())),
            Descriptor::IndicatorPoint { point } => Ok(ExtendedReal::of(y.dot(point))),
            Descriptor::SupportFunction { set } => Ok(indicator(set.contains(y))),
            Descriptor::Scaled { factor, inner } => {
                let v = inner.conj(&y.scale(1.0 / factor))?;
                Ok(if v.is_finite() {
                    ExtendedReal::of(factor * v.value())
                } else {
                    v
                })
            }
            Descriptor::Sum(terms) => {
                if let [single] = terms.as_slice() {
                    return single.conj(y);
                }
                if let Some(np) = NormPlusQuadratic::recognise(terms) {
                    return Ok(np.conjugate(y));
                }
                if let Some(q) = merge_quadratics(terms) {
                    return q.conj(y);
                }
                Err(Error::NoClosedForm(format!("conjugate of {}", self.name())))
            }
            Descriptor::Custom(c) => c
                .conjugate
                .as_ref()
                .map(|g| g(y))
                .ok_or_else(|| Error::NoClosedForm(format!("conjugate of {}", c.name))),
        }
    }

    /// Whether a closed-form conjugate is available.
    pub fn has_closed_form_conjugate(&self) -> bool {
        self.conj(&PhaseVector::zeros(self.n)).is_ok()
    }

    /// The conjugate as a library function, for the families where it is
    /// again in the library.
    pub fn conjugate_function(&self) -> Result<ConvexFunction> {
        match &self.descriptor {
            Descriptor::Quadratic { a, b, c } => {
                let eig = self.eigen.as_ref().expect("eigensystem");
                let tol = eig_tol(&eig.values);
                if eig.values.iter().any(|l| *l <= tol) {
                    return Err(Error::NoClosedForm(
                        "conjugate of a degenerate quadratic as a function".into(),
                    ));
                }
                let inv_diag = DMatrix::from_diagonal(&eig.values.map(|l| 1.0 / l));
                let a_inv = &eig.vectors * inv_diag * eig.vectors.transpose();
                let a_inv = (&a_inv + a_inv.transpose()) * 0.5;
                let bv = to_dvector(b);
                let lin = -(&a_inv * &bv);
                let c_new = 0.5 * bv.dot(&(&a_inv * &bv)) - c;
                let _ = a;
                ConvexFunction::quadratic(a_inv, from_dvector(&lin), c_new)
            }
            Descriptor::IndicatorPoint { point } => ConvexFunction::linear(point.clone()),
            Descriptor::IndicatorBall { radius } if *radius > 0.0 => {
                ConvexFunction::scaled(*radius, ConvexFunction::euclidean_norm(self.n))
            }
            Descriptor::SupportFunction {
                set: ConvexSet::Ball { center, radius },
            } if center.norm_inf() == 0.0 => ConvexFunction::indicator_ball(self.n, *radius),
            Descriptor::WeightedNorm { weights } if weights.to_flat().iter().all(|&w| w == 1.0) => {
                ConvexFunction::indicator_ball(self.n, 1.0)
            }
            _ => Err(Error::NoClosedForm(format!(
                "conjugate of {} as a library function",
                self.name()
            ))),
        }
    }

    /// `prox_{gamma f}(x) = argmin_v f(v) + |v - x|^2 / (2 gamma)`.
    pub fn prox(&self, x: &PhaseVector, gamma: f64) -> Result<PhaseVector> {
        self.check(x)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("prox step {gamma} must be > 0")));
        }
        self.prox_unchecked(x, gamma)
    }

    pub(crate) fn prox_unchecked(&self, x: &PhaseVector, gamma: f64) -> Result<PhaseVector> {
        match &self.descriptor {
            Descriptor::Quadratic { b, .. } => {
                let eig = self.eigen.as_ref().expect("eigensystem");
                let r = to_dvector(&x.axpy(-gamma, b));
                let mut u = eig.vectors.transpose() * r;
                for (ui, li) in u.iter_mut().zip(eig.values.iter()) {
                    *ui /= 1.0 + gamma * li.max(0.0);
                }
                Ok(from_dvector(&(&eig.vectors * u)))
            }
            Descriptor::WeightedNorm { weights } => Ok(NormPlusQuadratic {
                weights: weights.clone(),
                kappa: 0.0,
                offset: 0.0,
            }
            .prox(x, gamma)),
            Descriptor::IndicatorBall { radius } => Ok(ConvexSet::Ball {
                center: PhaseVector::zeros(self.n),
                radius: *radius,
            }
            .project(x)),
            Descriptor::IndicatorPoint { point } => Ok(point.clone()),
            Descriptor::SupportFunction { set } => {
                // Moreau: prox_{g s_C}(x) = x - g P_C(x / g)
                Ok(x.axpy(-gamma, &set.project(&x.scale(1.0 / gamma))))
            }
            Descriptor::Scaled { factor, inner } => inner.prox_unchecked(x, gamma * factor),
            Descriptor::Sum(terms) => {
                if let [single] = terms.as_slice() {
                    return single.prox_unchecked(x, gamma);
                }
                if let Some(np) = NormPlusQuadratic::recognise(terms) {
                    return Ok(np.prox(x, gamma));
                }
                if let Some(q) = merge_quadratics(terms) {
                    return q.prox_unchecked(x, gamma);
                }
                Err(Error::NoClosedForm(format!("prox of {}", self.name())))
            }
            Descriptor::Custom(c) => c
                .prox
                .as_ref()
                .map(|p| p(x, gamma))
                .ok_or_else(|| Error::NoClosedForm(format!("prox of {}", c.name))),
        }
    }
}

fn indicator(inside: bool) -> ExtendedReal {
    if inside {
        ExtendedReal::ZERO
    } else {
        ExtendedReal::INFINITY
    }
}

/// `|W^+ y|` if `y` vanishes off the support of `W`, `+inf` otherwise.
fn weighted_dual_norm(y: &PhaseVector, weights: &PhaseVector) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 * y.half_dim() {
        let (yi, wi) = (y.get(i), weights.get(i));
        if wi > 0.0 {
            acc += (yi / wi) * (yi / wi);
        } else if yi.abs() > FEAS_TOL {
            return f64::INFINITY;
        }
    }
    acc.sqrt()
}

fn merge_quadratics(terms: &[ConvexFunction]) -> Option<ConvexFunction> {
    let n = terms[0].n;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = PhaseVector::zeros(n);
    let mut c = 0.0;
    for t in terms {
        match &t.descriptor {
            Descriptor::Quadratic { a: ta, b: tb, c: tc } => {
                a += ta;
                b = &b + tb;
                c += tc;
            }
            _ => return None,
        }
    }
    ConvexFunction::quadratic(a, b, c).ok()
}

/// `|W v| + (kappa/2) |W v|^2 + offset`, the elastic-plastic pattern.
struct NormPlusQuadratic {
    weights: PhaseVector,
    kappa: f64,
    offset: f64,
}

impl NormPlusQuadratic {
    fn recognise(terms: &[ConvexFunction]) -> Option<Self> {
        let [x, y] = terms else { return None };
        let (weights, quad) = match (&x.descriptor, &y.descriptor) {
            (Descriptor::WeightedNorm { weights }, q @ Descriptor::Quadratic { .. })
            | (q @ Descriptor::Quadratic { .. }, Descriptor::WeightedNorm { weights }) => {
                (weights, q)
            }
            _ => return None,
        };
        let Descriptor::Quadratic { a, b, c } = quad else { return None };
        if b.norm_inf() != 0.0 {
            return None;
        }
        let dim = 2 * weights.half_dim();
        let lead = (0..dim).find(|&i| weights.get(i) > 0.0)?;
        let kappa = a[(lead, lead)] / (weights.get(lead) * weights.get(lead));
        if !(kappa > 0.0) {
            return None;
        }
        let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j {
                    kappa * weights.get(i) * weights.get(i)
                } else {
                    0.0
                };
                if (a[(i, j)] - expect).abs() > 1e-12 * scale {
                    return None;
                }
            }
        }
        Some(Self {
            weights: weights.clone(),
            kappa,
            offset: *c,
        })
    }

    fn conjugate(&self, y: &PhaseVector) -> ExtendedReal {
        let u = weighted_dual_norm(y, &self.weights);
        if !u.is_finite() {
            return ExtendedReal::INFINITY;
        }
        let excess = (u - 1.0).max(0.0);
        ExtendedReal::of(excess * excess / (2.0 * self.kappa) - self.offset)
    }

    /// Solves the optimality system `v_i = x_i / (1 + g w_i^2 (1/s + kappa))`
    /// with `s = |W v|` by bisection on a strictly decreasing secular function.
    fn prox(&self, x: &PhaseVector, gamma: f64) -> PhaseVector {
        let dim = 2 * x.half_dim();
        let w = |i: usize| self.weights.get(i);
        let dual: f64 = (0..dim)
            .filter(|&i| w(i) > 0.0)
            .map(|i| (x.get(i) / (gamma * w(i))).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut out = x.clone();
        if dual <= 1.0 {
            for i in 0..dim {
                if w(i) > 0.0 {
                    out.set(i, 0.0);
                }
            }
            return out;
        }
        let secular = |s: f64| -> f64 {
            (0..dim)
                .filter(|&i| w(i) > 0.0)
                .map(|i| {
                    let wi = w(i);
                    (wi * x.get(i) / (s * (1.0 + gamma * self.kappa * wi * wi) + gamma * wi * wi))
                        .powi(2)
                })
                .sum::<f64>()
                .sqrt()
                - 1.0
        };
        let mut lo = 0.0;
        let mut hi = x.zip_with(&self.weights, |a, b| a * b).norm().max(f64::MIN_POSITIVE);
        while secular(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if secular(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        for i in 0..dim {
            let wi = w(i);
            if wi > 0.0 {
                out.set(i, x.get(i) / (1.0 + gamma * wi * wi * (1.0 / s + self.kappa)));
            }
        }
        out
    }
}

/// Brute-force maximisation on a rectangular grid, the independent oracle for
/// conjugates and polars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Points per axis, endpoints included.
    pub resolution: usize,
}

/// Outcome of a grid maximisation, with the grid it was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub value: ExtendedReal,
    pub argmax: Option<PhaseVector>,
    /// Largest per-axis spacing.
    pub spacing: f64,
    pub resolution: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// The maximiser sits on the boundary of the grid box.
    pub on_boundary: bool,
}

impl GridEstimate {
    /// `2 * spacing * lipschitz`, the agreement band against a closed form.
    pub fn error_bound(&self, lipschitz: f64) -> f64 {
        2.0 * self.spacing * lipschitz
    }
}

/// Hard cap on grid evaluations.
const MAX_GRID_POINTS: usize = 50_000_000;

impl GridOracle {
    /// The cube `[lo, hi]^{2n}`.
    pub fn cube(n: usize, lo: f64, hi: f64, resolution: usize) -> Self {
        Self {
            lower: vec![lo; 2 * n],
            upper: vec![hi; 2 * n],
            resolution,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n > 4 {
            return Err(Error::InvalidArgument(format!(
                "grid oracle supports n <= 4, got {n}"
            )));
        }
        if self.lower.len() != 2 * n || self.upper.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.lower.len() / 2,
            });
        }
        if self.resolution < 2 {
            return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::InvalidArgument(format!("bad grid bounds [{l}, {u}]")));
            }
        }
        let points = (self.resolution as f64).powi(2 * n as i32);
        if points > MAX_GRID_POINTS as f64 {
            return Err(Error::InvalidArgument(format!(
                "grid with {points:e} points exceeds the {MAX_GRID_POINTS:e} cap"
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) / (self.resolution - 1) as f64)
            .fold(0.0, f64::max)
    }

    /// Visits every grid point in lexicographic order; the flag marks points
    /// on the boundary of the box.
    pub fn for_each_point(
        &self,
        n: usize,
        mut visit: impl FnMut(&PhaseVector, bool) -> Result<()>,
    ) -> Result<()> {
        self.validate(n)?;
        let dim = 2 * n;
        let r = self.resolution;
        let coord = |axis: usize, k: usize| -> f64 {
            let (l, u) = (self.lower[axis], self.upper[axis]);
            if k == r - 1 {
                u
            } else {
                l + (u - l) * k as f64 / (r - 1) as f64
            }
        };
        let mut idx = vec![0usize; dim];
        let mut z = PhaseVector::zeros(n);
        for axis in 0..dim {
            z.set(axis, coord(axis, 0));
        }
        loop {
            let edge = idx.iter().any(|&k| k == 0 || k == r - 1);
            visit(&z, edge)?;
            let mut axis = 0;
            loop {
                if axis == dim {
                    return Ok(());
                }
                idx[axis] += 1;
                if idx[axis] < r {
                    z.set(axis, coord(axis, idx[axis]));
                    break;
                }
                idx[axis] = 0;
                z.set(axis, coord(axis, 0));
                axis += 1;
            }
        }
    }

    /// Maximises `objective` over the grid; `None` stands for `-inf`.
    /// Ties keep the first point in lexicographic order.
    pub fn maximize(
        &self,
        n: usize,
        mut objective: impl FnMut(&PhaseVector) -> Option<f64>,
    ) -> Result<GridEstimate> {
        let mut best: Option<(f64, PhaseVector, bool)> = None;
        self.for_each_point(n, |z, edge| {
            if let Some(v) = objective(z) {
                if v.is_nan() {
                    return Err(Error::NonFinite("grid objective"));
                }
                if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                    best = Some((v, z.clone(), edge));
                }
            }
            Ok(())
        })?;
        let (value, argmax, on_boundary) = best.ok_or(Error::EmptyDomain)?;
        Ok(GridEstimate {
            value: ExtendedReal::new(value)?,
            argmax: Some(argmax),
            spacing: self.spacing(),
            resolution: self.resolution,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            on_boundary,
        })
    }
}

/// How a conjugate or polar is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum ConjugateMethod {
    ClosedForm,
    Grid(GridOracle),
}

/// Grid estimate of `f^*(y)`.
pub fn grid_conjugate(f: &ConvexFunction, y: &PhaseVector, grid: &GridOracle) -> Result<GridEstimate> {
    y.ensure_dim(f.half_dim())?;
    grid.maximize(f.half_dim(), |z| f.eval(z).finite().map(|fz| y.dot(z) - fz))
}

/// Grid estimate of `F^{*w}(z') = sup_z w(z', z) - F(z)`, maximising the
/// definition directly rather than going through `J`.
pub fn grid_symplectic_polar(
    s: &SymplecticStructure,
    f: &ConvexFunction,
    z_prime: &PhaseVector,
    grid: &GridOracle,
) -> Result<GridEstimate> {
    z_prime.ensure_dim(s.half_dim())?;
    f.half_dim_matches(s)?;
    grid.maximize(f.half_dim(), |z| {
        f.eval(z).finite().map(|fz| omega_unchecked(z_prime, z) - fz)
    })
}

impl ConvexFunction {
    fn half_dim_matches(&self, s: &SymplecticStructure) -> Result<()> {
        if self.n == s.half_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: s.half_dim(),
                found: self.n,
            })
        }
    }
}

/// `f^*(y)`.
pub fn fenchel_conjugate(
    f: &ConvexFunction,
    y: &PhaseVector,
    method: &ConjugateMethod,
) -> Result<ExtendedReal> {
    match method {
        ConjugateMethod::ClosedForm => {
            if f.half_dim() > 16 {
                return Err(Error::InvalidArgument("closed forms support n <= 16".into()));
            }
            f.conjugate(y)
        }
        ConjugateMethod::Grid(grid) => grid_conjugate(f, y, grid).map(|e| e.value),
    }
}

/// `F^{*w}(z')`.
pub fn symplectic_polar(
    s: &SymplecticStructure,
    f: &ConvexFunction,
    z_prime: &PhaseVector,
    method: &ConjugateMethod,
) -> Result<ExtendedReal> {
    f.half_dim_matches(s)?;
    match method {
        ConjugateMethod::ClosedForm => fenchel_conjugate(f, &s.j_map(z_prime)?, method),
        ConjugateMethod::Grid(grid) => grid_symplectic_polar(s, f, z_prime, grid).map(|e| e.value),
    }
}

/// A sampled direction along which the subdifferential inequality fails.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdifferentialViolation {
    pub direction: PhaseVector,
    /// `F(z) + w(z', z'') - F(z + z'')`, positive when violated.
    pub defect: f64,
}

/// First sampled `z''` with `F(z + z'') < F(z) + w(z', z'') - tol`.
pub fn symplectic_subdifferential_violation(
    s: &SymplecticStructure,
    f: &ConvexFunction,
    z: &PhaseVector,
    z_prime: &PhaseVector,
    tol: f64,
    sampler: &DirectionSampler,
) -> Result<Option<SubdifferentialViolation>> {
    f.half_dim_matches(s)?;
    z.ensure_dim(s.half_dim())?;
    z_prime.ensure_dim(s.half_dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let base = f.eval(z).finite().ok_or(Error::OutsideDomain)?;
    for w in sampler.directions(s.half_dim()) {
        let moved = f.eval(&(z + &w));
        let Some(moved) = moved.finite() else { continue };
        let defect = base + omega_unchecked(z_prime, &w) - moved;
        if defect > tol {
            return Ok(Some(SubdifferentialViolation { direction: w, defect }));
        }
    }
    Ok(None)
}

/// Sampled semi-decision of `z' in X F(z)`: true when no violation was found.
pub fn in_symplectic_subdifferential(
    s: &SymplecticStructure,
    f: &ConvexFunction,
    z: &PhaseVector,
    z_prime: &PhaseVector,
    tol: f64,
    sampler: &DirectionSampler,
) -> Result<bool> {
    symplectic_subdifferential_violation(s, f, z, z_prime, tol, sampler).map(|v| v.is_none())
}

/// `-J g` for a classical subgradient `g`: the element of the symplectic
/// subdifferential it determines.
pub fn symplectic_gradient_of(g: &PhaseVector) -> PhaseVector {
    -&j_apply(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn s1() -> SymplecticStructure {
        SymplecticStructure::new(1).unwrap()
    }

    fn z(q: f64, p: f64) -> PhaseVector {
        PhaseVector::scalar(q, p)
    }

    #[test]
    fn extended_real_arithmetic() {
        let inf = ExtendedReal::INFINITY;
        let one = ExtendedReal::new(1.0).unwrap();
        assert_eq!(inf + one, inf);
        assert_eq!(one + 2.0, ExtendedReal::new(3.0).unwrap());
        assert_eq!(inf.checked_sub(one).unwrap(), inf);
        assert!(matches!(inf.checked_sub(inf), Err(Error::InfiniteDifference)));
        assert!(one.checked_sub(inf).is_err());
        assert!(ExtendedReal::new(f64::NAN).is_err());
        assert!(ExtendedReal::new(f64::NEG_INFINITY).is_err());
        assert_eq!(serde_json::to_string(&inf).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&one).unwrap(), "1.0");
        let back: ExtendedReal = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, inf);
    }

    #[test]
    fn conjugate_closed_form_examples() {
        let f = ConvexFunction::half_squared_norm(1);
        assert_abs_diff_eq!(f.conjugate(&z(3.0, 4.0)).unwrap().value(), 12.5, epsilon = 1e-14);

        let norm = ConvexFunction::euclidean_norm(1);
        assert_eq!(norm.conjugate(&z(0.6, 0.8)).unwrap(), ExtendedReal::ZERO);
        assert_eq!(norm.conjugate(&z(0.3, -0.1)).unwrap(), ExtendedReal::ZERO);
        assert_eq!(norm.conjugate(&z(0.8, 0.8)).unwrap(), ExtendedReal::INFINITY);
    }

    #[test]
    fn conjugate_by_grid_matches_closed_form() {
        let f = ConvexFunction::half_squared_norm(1);
        let grid = GridOracle::cube(1, -10.0, 10.0, 2001);
        let est = grid_conjugate(&f, &z(3.0, 4.0), &grid).unwrap();
        assert!((est.value.value() - 12.5).abs() <= 1e-3);
        assert_eq!(est.resolution, 2001);
        assert_abs_diff_eq!(est.spacing, 0.01, epsilon = 1e-15);
        assert!(!est.on_boundary);
    }

    #[test]
    fn grid_on_empty_domain_is_an_error() {
        let f = ConvexFunction::indicator_point(z(50.0, 50.0)).unwrap();
        let grid = GridOracle::cube(1, -1.0, 1.0, 11);
        let err = fenchel_conjugate(&f, &z(0.0, 0.0), &ConjugateMethod::Grid(grid)).unwrap_err();
        assert_eq!(err.to_string(), "empty effective domain in bounds");
    }

    #[test]
    fn grid_rejects_bad_plans() {
        let f = ConvexFunction::half_squared_norm(1);
        let y = z(0.0, 0.0);
        let bad = [
            GridOracle::cube(1, -1.0, 1.0, 1),
            GridOracle::cube(1, 1.0, -1.0, 5),
            GridOracle::cube(1, f64::NEG_INFINITY, 1.0, 5),
            GridOracle::cube(2, -1.0, 1.0, 5),
        ];
        for grid in bad {
            assert!(grid_conjugate(&f, &y, &grid).is_err());
        }
        let big = ConvexFunction::half_squared_norm(5);
        assert!(grid_conjugate(&big, &PhaseVector::zeros(5), &GridOracle::cube(5, -1.0, 1.0, 2)).is_err());
    }

    #[test]
    fn symplectic_polar_examples() {
        let s = s1();
        let f = ConvexFunction::half_squared_norm(1);
        let exact = symplectic_polar(&s, &f, &z(1.0, 0.0), &ConjugateMethod::ClosedForm).unwrap();
        assert_abs_diff_eq!(exact.value(), 0.5, epsilon = 1e-15);
        let grid = GridOracle::cube(1, -3.0, 3.0, 601);
        let est = grid_symplectic_polar(&s, &f, &z(1.0, 0.0), &grid).unwrap();
        assert!((est.value.value() - 0.5).abs() <= est.error_bound(4.0));
        assert_eq!(est.argmax, Some(z(0.0, 1.0)));

        let point = ConvexFunction::indicator_point(z(0.0, 0.0)).unwrap();
        for zp in [z(1.0, 2.0), z(-3.0, 0.5), z(0.0, 0.0)] {
            let v = symplectic_polar(&s, &point, &zp, &ConjugateMethod::ClosedForm).unwrap();
            assert_eq!(v.value(), 0.0);
        }
    }

    #[test]
    fn polar_of_linear_is_an_indicator() {
        let s = s1();
        let f = ConvexFunction::linear(z(1.0, 2.0)).unwrap();
        let cf = ConjugateMethod::ClosedForm;
        assert_eq!(symplectic_polar(&s, &f, &z(2.0, -1.0), &cf).unwrap(), ExtendedReal::ZERO);
        assert_eq!(symplectic_polar(&s, &f, &z(1.0, -1.0), &cf).unwrap(), ExtendedReal::INFINITY);
        // Grid growth: the sup doubles with the box when J z' != a and stays
        // put when J z' = a.
        let at = |zp: PhaseVector, r: f64| {
            grid_symplectic_polar(&s, &f, &zp, &GridOracle::cube(1, -r, r, 41))
                .unwrap()
                .value
                .value()
        };
        let off = z(1.0, -1.0);
        assert_abs_diff_eq!(at(off.clone(), 20.0), 2.0 * at(off, 10.0), epsilon = 1e-9);
        assert_abs_diff_eq!(at(z(2.0, -1.0), 10.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at(z(2.0, -1.0), 20.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn subdifferential_examples() {
        let s = s1();
        let f = ConvexFunction::half_squared_norm(1);
        let sampler = DirectionSampler::default();
        assert!(in_symplectic_subdifferential(&s, &f, &z(1.0, 0.0), &z(0.0, -1.0), 1e-12, &sampler).unwrap());
        assert!(in_symplectic_subdifferential(&s, &f, &z(0.0, 0.0), &z(0.0, 0.0), 1e-12, &sampler).unwrap());
        let v = symplectic_subdifferential_violation(&s, &f, &z(1.0, 0.0), &z(1.0, 0.0), 1e-12, &sampler)
            .unwrap()
            .expect("a violating sample");
        assert!(v.defect > 0.0);
        let along_p = ConvexFunction::half_squared_norm(1);
        for t in [1e-2, -1e-2] {
            let w = z(0.0, t);
            let lhs = along_p.eval(&(&z(1.0, 0.0) + &w)).value();
            let rhs = along_p.eval(&z(1.0, 0.0)).value() + s.omega(&z(1.0, 0.0), &w).unwrap();
            assert_eq!(lhs < rhs, t > 0.0);
        }

        let outside = ConvexFunction::indicator_ball(1, 1.0).unwrap();
        let err = in_symplectic_subdifferential(&s, &outside, &z(2.0, 0.0), &z(0.0, 0.0), 1e-9, &sampler)
            .unwrap_err();
        assert_eq!(err.to_string(), "base point outside effective domain");
    }

    #[test]
    fn prox_closed_forms() {
        let x = z(3.0, -4.0);
        let q = ConvexFunction::half_squared_norm(1);
        assert_eq!(q.prox(&x, 1.0).unwrap(), z(1.5, -2.0));
        let norm = ConvexFunction::euclidean_norm(1);
        let p = norm.prox(&x, 1.0).unwrap();
        assert_abs_diff_eq!(p.q()[0], 2.4, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p()[0], -3.2, epsilon = 1e-12);
        assert_eq!(norm.prox(&z(0.3, 0.4), 1.0).unwrap(), z(0.0, 0.0));
        let ball = ConvexFunction::indicator_ball(1, 1.0).unwrap();
        let pr = ball.prox(&x, 7.0).unwrap();
        assert_abs_diff_eq!(pr.norm(), 1.0, epsilon = 1e-15);
        let supp = ConvexFunction::support_function(ConvexSet::Ball {
            center: z(0.0, 0.0),
            radius: 1.0,
        })
        .unwrap();
        assert_eq!(supp.prox(&x, 1.0).unwrap(), p);
        // weighted norm acts on the q block only
        let wn = ConvexFunction::weighted_norm(z(2.0, 0.0)).unwrap();
        assert_eq!(wn.prox(&z(3.0, 5.0), 0.5).unwrap(), z(2.0, 5.0));
        assert_eq!(wn.prox(&z(0.5, 5.0), 0.5).unwrap(), z(0.0, 5.0));
        assert!(q.prox(&x, 0.0).is_err());
    }

    #[test]
    fn elastic_plastic_sum_has_closed_forms() {
        let w = z(0.3, 0.0);
        let kappa = 2.0;
        let f = ConvexFunction::sum(vec![
            ConvexFunction::weighted_norm(w.clone()).unwrap(),
            ConvexFunction::diagonal_quadratic(&z(kappa * 0.09, 0.0)).unwrap(),
        ])
        .unwrap();
        // f(v) = 0.3|v_q| + 0.09 v_q^2; f*(y) = (|y_q|/0.3 - 1)_+^2 / 4 off y_p = 0
        assert_abs_diff_eq!(f.conjugate(&z(0.6, 0.0)).unwrap().value(), 0.25, epsilon = 1e-14);
        assert_eq!(f.conjugate(&z(0.2, 0.0)).unwrap(), ExtendedReal::ZERO);
        assert_eq!(f.conjugate(&z(0.2, 0.5)).unwrap(), ExtendedReal::INFINITY);
        // prox: minimise 0.3|v| + 0.09 v^2 + (v - 2)^2 / 2 -> v = (2 - 0.3) / 1.18
        let p = f.prox(&z(2.0, 1.0), 1.0).unwrap();
        assert_abs_diff_eq!(p.q()[0], 1.7 / 1.18, epsilon = 1e-12);
        assert_eq!(p.p()[0], 1.0);
        let mismatch = ConvexFunction::sum(vec![
            ConvexFunction::weighted_norm(w).unwrap(),
            ConvexFunction::diagonal_quadratic(&z(1.0, 1.0)).unwrap(),
        ])
        .unwrap();
        assert!(matches!(mismatch.conjugate(&z(0.0, 0.0)), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn quadratic_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(ConvexFunction::quadratic(bad, z(0.0, 0.0), 0.0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(ConvexFunction::quadratic(asym, z(0.0, 0.0), 0.0).is_err());
        let wrong = DMatrix::identity(3, 3);
        assert!(ConvexFunction::quadratic(wrong, z(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn degenerate_quadratic_conjugate_uses_range_condition() {
        // (c/2) v_q^2: conjugate is y_q^2 / (2c) on y_p = 0
        let f = ConvexFunction::diagonal_quadratic(&z(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(f.conjugate(&z(3.0, 0.0)).unwrap().value(), 2.25, epsilon = 1e-14);
        assert_eq!(f.conjugate(&z(3.0, 1e-3)).unwrap(), ExtendedReal::INFINITY);
    }

    #[test]
    fn conjugate_functions_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = ConvexFunction::quadratic(a, z(0.3, -0.2), 0.7).unwrap();
        let ff = f.conjugate_function().unwrap().conjugate_function().unwrap();
        for pt in [z(1.0, 2.0), z(-0.5, 0.1), z(0.0, 0.0)] {
            assert_abs_diff_eq!(ff.eval(&pt).value(), f.eval(&pt).value(), epsilon = 1e-12);
        }
        let ball = ConvexFunction::indicator_ball(1, 2.0).unwrap();
        let dual = ball.conjugate_function().unwrap();
        assert_abs_diff_eq!(dual.eval(&z(3.0, 4.0)).value(), 10.0, epsilon = 1e-14);
    }

    #[test]
    fn support_function_box() {
        let set = ConvexSet::Box {
            lower: z(-1.0, 0.0),
            upper: z(2.0, 1.0),
        };
        let f = ConvexFunction::support_function(set).unwrap();
        assert_eq!(f.eval(&z(1.0, -1.0)).value(), 2.0);
        assert_eq!(f.conjugate(&z(0.5, 0.5)).unwrap(), ExtendedReal::ZERO);
        assert_eq!(f.conjugate(&z(3.0, 0.5)).unwrap(), ExtendedReal::INFINITY);
        assert_eq!(f.subgradient(&z(1.0, -1.0)).unwrap(), Some(z(2.0, 0.0)));
    }

    #[test]
    fn scaled_and_custom() {
        let f = ConvexFunction::scaled(3.0, ConvexFunction::half_squared_norm(1)).unwrap();
        // (3/2)|z|^2 has conjugate |y|^2 / 6
        assert_abs_diff_eq!(f.conjugate(&z(3.0, 0.0)).unwrap().value(), 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.prox(&z(4.0, 0.0), 1.0).unwrap().q()[0], 1.0, epsilon = 1e-14);
        let c = ConvexFunction::custom(1, "abs_q", |v| ExtendedReal::of(v.q()[0].abs()));
        assert_eq!(c.eval(&z(-2.0, 5.0)).value(), 2.0);
        assert!(matches!(c.conjugate(&z(0.0, 0.0)), Err(Error::NoClosedForm(_))));
        assert_eq!(c.subgradient(&z(1.0, 0.0)).unwrap(), None);
        assert_eq!(c.name(), "abs_q");
        assert!(ConvexFunction::scaled(0.0, ConvexFunction::zero(1)).is_err());
    }
}
