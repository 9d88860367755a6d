//! Bipotentials relative to a duality, their constructions from convex
//! potentials and likelihoods, duality changes and the sampled contact-set
//! equivalence.
//!
//! A bipotential `b(z; z', z'')` satisfies `b >= d(z', z'')` and its equality
//! locus coincides with both sampled subgradient inclusions:
//!
//! * right: `b(z' + w, z'') >= b(z', z'') + d(w, z'')` for all `w`,
//! * left:  `b(z', z'' + w) >= b(z', z'') + d(z', w)` for all `w`.

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{uniform_t, SamplePlan, Verdict, Witness};
use crate::convex::{symplectic_polar, ConjugateMethod, ConvexFunction, ExtendedReal};
use crate::error::{Error, Result};
use crate::likelihood::{check_likelihood_axioms, Likelihood, LikelihoodKind};
use crate::phase_space::{j_apply, omega_unchecked, DualityKind, PhaseVector, SymplecticStructure};
use crate::sampling::{rng, uniform_box, DirectionSampler};

type BipFn = dyn Fn(&PhaseVector, &PhaseVector, &PhaseVector) -> ExtendedReal + Send + Sync;
type ProxFn = dyn Fn(&PhaseVector, &PhaseVector, &PhaseVector, f64) -> PhaseVector + Send + Sync;
type ContactFn = dyn Fn(&PhaseVector, &mut ChaCha8Rng) -> (PhaseVector, PhaseVector) + Send + Sync;

/// Default contact tolerance.
pub const CONTACT_TOL: f64 = 1e-8;

/// Gaps `b - d` below this (times `1 + |d|`) may be invisible to the sampled
/// subgradient tests; such pairs are counted as unresolved, not as failures.
const RESOLVABLE_GAP: f64 = 1e-6;

/// A user-supplied bipotential. The closures receive `(z, z', z'')`.
#[derive(Clone)]
pub struct CustomBipotential {
    pub name: String,
    b: Arc<BipFn>,
    prox_second: Option<Arc<ProxFn>>,
    contact_sampler: Option<Arc<ContactFn>>,
}

impl fmt::Debug for CustomBipotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomBipotential")
            .field("name", &self.name)
            .field("prox_second", &self.prox_second.is_some())
            .field("contact_sampler", &self.contact_sampler.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum BipotentialKind {
    /// `phi^{*w}(z') + phi(z'')`.
    Separable {
        phi: ConvexFunction,
        polar: ConjugateMethod,
    },
    /// `I(z, z', z'') + d_L(z', z'')` with `d_L` the duality at construction.
    FromLikelihood(Likelihood),
    /// `max{0, w(z', z'')}`.
    MinimalSymplectic,
    Custom(CustomBipotential),
}

/// A state-parametrised bipotential together with its duality.
#[derive(Debug, Clone)]
pub struct Bipotential {
    s: SymplecticStructure,
    kind: BipotentialKind,
    /// Duality the kind's formula is written against.
    base_duality: DualityKind,
    duality: DualityKind,
    tempered: Option<bool>,
}

/// `max{0, w(z', z'')}`
pub fn minimal_symplectic_bipotential(
    s: &SymplecticStructure,
    z_prime: &PhaseVector,
    z_second: &PhaseVector,
) -> Result<f64> {
    Ok(s.omega(z_prime, z_second)?.max(0.0))
}

/// `prox` of `g max{0, <a, v>}` at `x`.
fn hinge_prox(a: &PhaseVector, x: &PhaseVector, gamma: f64) -> PhaseVector {
    let aa = a.dot(a);
    let s = a.dot(x);
    if aa == 0.0 || s <= 0.0 {
        x.clone()
    } else if s >= gamma * aa {
        x.axpy(-gamma, a)
    } else {
        x.axpy(-s / aa, a)
    }
}

impl Bipotential {
    fn build(s: SymplecticStructure, kind: BipotentialKind, duality: DualityKind) -> Self {
        Self {
            s,
            kind,
            base_duality: duality,
            duality,
            tempered: None,
        }
    }

    pub fn minimal(s: &SymplecticStructure) -> Self {
        let mut b = Self::build(*s, BipotentialKind::MinimalSymplectic, DualityKind::Symplectic);
        b.tempered = Some(true);
        b
    }

    /// A bipotential from an arbitrary closure, relative to `duality`.
    pub fn custom(
        s: &SymplecticStructure,
        name: impl Into<String>,
        duality: DualityKind,
        b: impl Fn(&PhaseVector, &PhaseVector, &PhaseVector) -> ExtendedReal + Send + Sync + 'static,
    ) -> Self {
        Self::build(
            *s,
            BipotentialKind::Custom(CustomBipotential {
                name: name.into(),
                b: Arc::new(b),
                prox_second: None,
                contact_sampler: None,
            }),
            duality,
        )
    }

    fn custom_mut(&mut self) -> &mut CustomBipotential {
        match &mut self.kind {
            BipotentialKind::Custom(c) => c,
            _ => panic!("builder method only applies to custom bipotentials"),
        }
    }

    /// Proximal map of `v -> b(z, z', v)`, called as `(z, z', x, gamma)`.
    pub fn with_prox_second(
        mut self,
        prox: impl Fn(&PhaseVector, &PhaseVector, &PhaseVector, f64) -> PhaseVector + Send + Sync + 'static,
    ) -> Self {
        self.custom_mut().prox_second = Some(Arc::new(prox));
        self
    }

    /// Generator of pairs on the contact set at state `z`, used by the axiom
    /// check to probe the equality locus.
    pub fn with_contact_sampler(
        mut self,
        sampler: impl Fn(&PhaseVector, &mut ChaCha8Rng) -> (PhaseVector, PhaseVector) + Send + Sync + 'static,
    ) -> Self {
        self.custom_mut().contact_sampler = Some(Arc::new(sampler));
        self
    }

    /// Marks whether the bipotential comes from a tempered law (`b >= 0`).
    pub fn with_tempered(mut self, tempered: bool) -> Self {
        self.tempered = Some(tempered);
        self
    }

    pub fn structure(&self) -> &SymplecticStructure {
        &self.s
    }

    pub fn half_dim(&self) -> usize {
        self.s.half_dim()
    }

    pub fn duality(&self) -> DualityKind {
        self.duality
    }

    pub fn kind(&self) -> &BipotentialKind {
        &self.kind
    }

    /// Whether the generating likelihood was found tempered, when known.
    pub fn tempered(&self) -> Option<bool> {
        self.tempered
    }

    pub fn name(&self) -> String {
        let base = match &self.kind {
            BipotentialKind::Separable { phi, .. } => format!("separable({})", phi.name()),
            BipotentialKind::FromLikelihood(l) => format!("likelihood({})", l.name()),
            BipotentialKind::MinimalSymplectic => "minimal_symplectic".into(),
            BipotentialKind::Custom(c) => c.name.clone(),
        };
        if self.base_duality == self.duality {
            base
        } else {
            format!("{base}[{:?} -> {:?}]", self.base_duality, self.duality)
        }
    }

    fn check(&self, zs: [&PhaseVector; 3]) -> Result<()> {
        zs.iter().try_for_each(|z| z.ensure_dim(self.s.half_dim()))
    }

    /// `b(z, z', z'')`.
    pub fn eval(&self, z: &PhaseVector, z_prime: &PhaseVector, z_second: &PhaseVector) -> Result<ExtendedReal> {
        self.check([z, z_prime, z_second])?;
        self.value(z, z_prime, z_second)
    }

    fn base_value(&self, z: &PhaseVector, zp: &PhaseVector, zs: &PhaseVector) -> Result<ExtendedReal> {
        match &self.kind {
            BipotentialKind::Separable { phi, polar } => {
                let p = match polar {
                    ConjugateMethod::ClosedForm => phi.conjugate(&j_apply(zp))?,
                    method => symplectic_polar(&self.s, phi, zp, method)?,
                };
                Ok(p + phi.eval(zs))
            }
            BipotentialKind::FromLikelihood(l) => {
                let i = l.info_unchecked(z, zp, zs)?;
                Ok(i + self.base_duality.eval_unchecked(zp, zs))
            }
            BipotentialKind::MinimalSymplectic => Ok(ExtendedReal::of(omega_unchecked(zp, zs).max(0.0))),
            BipotentialKind::Custom(c) => Ok((c.b)(z, zp, zs)),
        }
    }

    pub(crate) fn value(&self, z: &PhaseVector, zp: &PhaseVector, zs: &PhaseVector) -> Result<ExtendedReal> {
        let base = self.base_value(z, zp, zs)?;
        if self.base_duality == self.duality {
            return Ok(base);
        }
        Ok(match base.finite() {
            Some(v) => ExtendedReal::of(
                v - self.base_duality.eval_unchecked(zp, zs) + self.duality.eval_unchecked(zp, zs),
            ),
            None => base,
        })
    }

    /// `d(z', z'')` for this bipotential's duality.
    pub fn pairing(&self, z_prime: &PhaseVector, z_second: &PhaseVector) -> f64 {
        self.duality.eval_unchecked(z_prime, z_second)
    }

    /// `prox` of `v -> b(z, z', v)` at `x` with step `gamma`, when the kind
    /// supports it.
    pub fn prox_second(
        &self,
        z: &PhaseVector,
        z_prime: &PhaseVector,
        x: &PhaseVector,
        gamma: f64,
    ) -> Result<Option<PhaseVector>> {
        self.check([z, z_prime, x])?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("prox step {gamma} must be > 0")));
        }
        // b' = b + <(D - D_base) z', v>: shift x before the base prox.
        let x = if self.base_duality == self.duality {
            x.clone()
        } else {
            let a = &self.duality.left_operator(z_prime) - &self.base_duality.left_operator(z_prime);
            x.axpy(-gamma, &a)
        };
        let separable_prox = |phi: &ConvexFunction, x: &PhaseVector| match phi.prox_unchecked(x, gamma) {
            Ok(v) => Ok(Some(v)),
            Err(Error::NoClosedForm(_)) => Ok(None),
            Err(e) => Err(e),
        };
        match &self.kind {
            BipotentialKind::Separable { phi, .. } => separable_prox(phi, &x),
            BipotentialKind::MinimalSymplectic => Ok(Some(hinge_prox(&j_apply(z_prime), &x, gamma))),
            BipotentialKind::FromLikelihood(l) => {
                let lin = self.base_duality.left_operator(z_prime);
                match l.kind() {
                    LikelihoodKind::Maximal => {
                        Ok(Some(hinge_prox(&-&j_apply(z_prime), &x.axpy(-gamma, &lin), gamma)))
                    }
                    LikelihoodKind::Constant(_) => Ok(Some(x.axpy(-gamma, &lin))),
                    LikelihoodKind::Separable(phi) => {
                        let shift = &lin - &j_apply(z_prime);
                        separable_prox(phi, &x.axpy(-gamma, &shift))
                    }
                    LikelihoodKind::Custom(_) => Ok(None),
                }
            }
            BipotentialKind::Custom(c) => Ok(c.prox_second.as_ref().map(|p| p(z, z_prime, &x, gamma))),
        }
    }

    /// Draws a pair expected to lie on the contact set, when the kind knows
    /// how to construct one.
    fn contact_pair(&self, z: &PhaseVector, rng: &mut ChaCha8Rng, half_width: f64) -> Option<(PhaseVector, PhaseVector)> {
        let n = self.half_dim();
        // Jz' in dphi(v) with v = prox(x), Jz' = x - v.
        let from_prox = |phi: &ConvexFunction, rng: &mut ChaCha8Rng| {
            let x = uniform_box(rng, n, half_width);
            let v = phi.prox_unchecked(&x, 1.0).ok()?;
            let g = &x - &v;
            Some((-&j_apply(&g), v))
        };
        let nonneg_omega = |rng: &mut ChaCha8Rng| {
            let zp = uniform_box(rng, n, half_width);
            let zs = uniform_box(rng, n, half_width);
            if omega_unchecked(&zp, &zs) < 0.0 {
                Some((zp, -&zs))
            } else {
                Some((zp, zs))
            }
        };
        match &self.kind {
            BipotentialKind::Separable { phi, .. } => from_prox(phi, rng),
            BipotentialKind::MinimalSymplectic => nonneg_omega(rng),
            BipotentialKind::FromLikelihood(l) => match l.kind() {
                LikelihoodKind::Maximal => nonneg_omega(rng),
                LikelihoodKind::Separable(phi) => from_prox(phi, rng),
                _ => None,
            },
            BipotentialKind::Custom(c) => c.contact_sampler.as_ref().map(|f| f(z, rng)),
        }
    }
}

/// `phi^{*w}(z') + phi(z'')` with a closed-form polar.
pub fn separable_bipotential(s: &SymplecticStructure, phi: ConvexFunction) -> Result<Bipotential> {
    separable_bipotential_with(s, phi, ConjugateMethod::ClosedForm)
}

/// Separable bipotential with an explicit polar method; a grid polar makes
/// evaluation expensive but needs no closed form.
pub fn separable_bipotential_with(
    s: &SymplecticStructure,
    phi: ConvexFunction,
    polar: ConjugateMethod,
) -> Result<Bipotential> {
    if phi.half_dim() != s.half_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.half_dim(),
            found: phi.half_dim(),
        });
    }
    if polar == ConjugateMethod::ClosedForm && !phi.has_closed_form_conjugate() {
        return Err(Error::NoClosedForm(format!(
            "symplectic polar of {} (supply grid bounds)",
            phi.name()
        )));
    }
    let mut b = Bipotential::build(*s, BipotentialKind::Separable { phi, polar }, DualityKind::Symplectic);
    b.tempered = Some(true);
    Ok(b)
}

/// `b_d = I + d` after checking that `l` is a likelihood on `plan`.
pub fn bipotential_from_likelihood(
    l: &Likelihood,
    s: &SymplecticStructure,
    d: DualityKind,
    plan: &SamplePlan,
) -> Result<Bipotential> {
    let report = check_likelihood_axioms(l, s, plan)?;
    if let Some((axiom, witness)) = report.first_failure() {
        return Err(Error::NotLikelihood { axiom, witness });
    }
    let mut b = Bipotential::build(*s, BipotentialKind::FromLikelihood(l.clone()), d);
    b.tempered = report.tempered.map(|t| t.pass);
    Ok(b)
}

/// `b' = b - d + d_new`; equality loci are unchanged.
pub fn change_duality(b: &Bipotential, d_new: DualityKind) -> Bipotential {
    let mut out = b.clone();
    out.duality = d_new;
    out
}

/// The three contact characterisations at one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactDiagnostics {
    /// `b - d`, `+inf` outside the domain.
    pub excess: ExtendedReal,
    pub equality: bool,
    /// Largest defect found by the right subgradient test, if any.
    pub right_violation: Option<f64>,
    pub left_violation: Option<f64>,
    /// All three characterisations agree.
    pub consistent: bool,
    /// Non-contact with a gap too small for the sampled tests to see.
    pub unresolved: bool,
}

/// Evaluates the equality and both sampled subgradient tests at one pair.
pub fn contact_diagnostics(
    bp: &Bipotential,
    z: &PhaseVector,
    z_prime: &PhaseVector,
    z_second: &PhaseVector,
    tol: f64,
    sampler: &DirectionSampler,
) -> Result<ContactDiagnostics> {
    bp.check([z, z_prime, z_second])?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("contact tolerance {tol} must be > 0")));
    }
    let directions = sampler.directions(bp.half_dim());
    contact_diagnostics_with(bp, z, z_prime, z_second, tol, &directions)
}

fn contact_diagnostics_with(
    bp: &Bipotential,
    z: &PhaseVector,
    zp: &PhaseVector,
    zs: &PhaseVector,
    tol: f64,
    directions: &[PhaseVector],
) -> Result<ContactDiagnostics> {
    let d = bp.pairing(zp, zs);
    let slack = tol * (1.0 + d.abs());
    let b = bp.value(z, zp, zs)?;
    let Some(bv) = b.finite() else {
        // Outside the domain both subdifferentials are empty.
        return Ok(ContactDiagnostics {
            excess: ExtendedReal::INFINITY,
            equality: false,
            right_violation: Some(f64::INFINITY),
            left_violation: Some(f64::INFINITY),
            consistent: true,
            unresolved: false,
        });
    };
    let excess = bv - d;
    let equality = excess.abs() <= slack;
    let mut right: Option<f64> = None;
    let mut left: Option<f64> = None;
    let record = |slot: &mut Option<f64>, defect: f64| {
        if defect > slack {
            *slot = Some(slot.map_or(defect, |m: f64| m.max(defect)));
        }
    };
    for w in directions {
        if let Some(moved) = bp.value(z, &(zp + w), zs)?.finite() {
            record(&mut right, bv + bp.pairing(w, zs) - moved);
        }
        if let Some(moved) = bp.value(z, zp, &(zs + w))?.finite() {
            record(&mut left, bv + bp.pairing(zp, w) - moved);
        }
    }
    let (consistent, unresolved) = if equality {
        let strict = 10.0 * slack;
        let clean = |v: Option<f64>| v.is_none_or(|x| x <= strict);
        (clean(right) && clean(left), false)
    } else if right.is_some() && left.is_some() {
        (true, false)
    } else if excess.abs() <= RESOLVABLE_GAP * (1.0 + d.abs()) {
        (true, true)
    } else {
        (false, false)
    };
    Ok(ContactDiagnostics {
        excess: ExtendedReal::new(excess.max(0.0)).unwrap_or(ExtendedReal::ZERO),
        equality,
        right_violation: right,
        left_violation: left,
        consistent,
        unresolved,
    })
}

/// Whether `(z', z'')` is on the contact set of `b` at state `z`; the two
/// sampled subgradient characterisations are cross-checked and any clear
/// disagreement is reported as an error.
pub fn in_contact_set(
    bp: &Bipotential,
    z: &PhaseVector,
    z_prime: &PhaseVector,
    z_second: &PhaseVector,
    tol: f64,
) -> Result<bool> {
    let sampler = DirectionSampler::default().with_random(200);
    let diag = contact_diagnostics(bp, z, z_prime, z_second, tol, &sampler)?;
    if !diag.consistent {
        return Err(Error::EquivalenceViolated(format!(
            "at z={:?}, z'={:?}, z''={:?}: equality {} (b - d = {:e}), right violation {:?}, left violation {:?}",
            z.to_flat(),
            z_prime.to_flat(),
            z_second.to_flat(),
            diag.equality,
            diag.excess.value(),
            diag.right_violation,
            diag.left_violation
        )));
    }
    Ok(diag.equality)
}

/// Outcome of the sampled bipotential checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipotentialReport {
    /// `b >= d` on random triples.
    pub axiom_a: Verdict,
    /// Convexity in each slot along segments.
    pub convexity: Verdict,
    /// Three-way agreement of the contact characterisations.
    pub axiom_b: Verdict,
    pub samples_used: usize,
    pub contact_pairs_probed: usize,
    pub contact_pairs_found: usize,
    pub unresolved: usize,
}

impl BipotentialReport {
    pub fn pass(&self) -> bool {
        self.axiom_a.pass && self.convexity.pass && self.axiom_b.pass
    }
}

/// Sampled test of the bipotential axioms.
pub fn check_bipotential_axioms(bp: &Bipotential, plan: &SamplePlan) -> Result<BipotentialReport> {
    let n = bp.half_dim();
    let mut rng = rng(plan.seed);
    let hw = plan.half_width;
    let mut axiom_a = Verdict::new();
    let mut convexity = Verdict::new();
    let mut axiom_b = Verdict::new();
    let mut used = 0;

    for _ in 0..plan.samples {
        let z = uniform_box(&mut rng, n, hw);
        let zp = uniform_box(&mut rng, n, hw);
        let zs = uniform_box(&mut rng, n, hw);
        used += 1;
        let b = bp.value(&z, &zp, &zs)?;
        let d = bp.pairing(&zp, &zs);
        if let Some(bv) = b.finite() {
            if bv < d - plan.tol {
                axiom_a.fail(Witness {
                    z,
                    z_prime: zp,
                    z_second: zs,
                    defect: d - bv,
                    note: "b < d".into(),
                });
            }
        }
    }

    for _ in 0..plan.segments {
        let z = uniform_box(&mut rng, n, hw);
        let fixed = uniform_box(&mut rng, n, hw);
        let v1 = uniform_box(&mut rng, n, hw);
        let v2 = uniform_box(&mut rng, n, hw);
        for second_slot in [true, false] {
            let t = uniform_t(&mut rng);
            let mid = &v1.scale(t) + &v2.scale(1.0 - t);
            let f = |v: &PhaseVector| {
                if second_slot {
                    bp.value(&z, &fixed, v)
                } else {
                    bp.value(&z, v, &fixed)
                }
            };
            used += 3;
            let (f1, f2, fm) = (f(&v1)?, f(&v2)?, f(&mid)?);
            let Some(rhs) = f1.finite().zip(f2.finite()).map(|(a, b)| t * a + (1.0 - t) * b) else {
                continue;
            };
            let excess = fm.finite().map_or(f64::INFINITY, |m| m - rhs);
            if excess > plan.tol * rhs.abs().max(1.0) {
                let (zp, zs) = if second_slot { (fixed.clone(), mid) } else { (mid, fixed.clone()) };
                convexity.fail(Witness {
                    z: z.clone(),
                    z_prime: zp,
                    z_second: zs,
                    defect: excess,
                    note: format!(
                        "not convex in the {} slot at t = {t}",
                        if second_slot { "second" } else { "first" }
                    ),
                });
            }
        }
    }

    let directions = plan.sampler.directions(n);
    let mut found = 0;
    let mut unresolved = 0;
    for k in 0..plan.contact_pairs {
        let z = uniform_box(&mut rng, n, hw);
        let constructed = if k % 2 == 0 {
            bp.contact_pair(&z, &mut rng, hw)
        } else {
            None
        };
        let (zp, zs) = match constructed {
            Some(pair) => pair,
            None => (uniform_box(&mut rng, n, hw), uniform_box(&mut rng, n, hw)),
        };
        let diag = contact_diagnostics_with(bp, &z, &zp, &zs, CONTACT_TOL, &directions)?;
        used += 1 + 2 * directions.len();
        found += usize::from(diag.equality);
        unresolved += usize::from(diag.unresolved);
        if !diag.consistent {
            axiom_b.fail(Witness {
                z,
                z_prime: zp,
                z_second: zs,
                defect: diag.excess.value(),
                note: format!(
                    "equality {} but right violation {:?}, left violation {:?}",
                    diag.equality, diag.right_violation, diag.left_violation
                ),
            });
        }
    }

    Ok(BipotentialReport {
        axiom_a,
        convexity,
        axiom_b,
        samples_used: used,
        contact_pairs_probed: plan.contact_pairs,
        contact_pairs_found: found,
        unresolved,
    })
}
