//! Likelihoods `pi(z, z', z'') in [0, 1]`, information contents `I = -ln pi`,
//! the maximal likelihood and the sampled axiom checks.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::checks::{uniform_t, AxiomVariant, SamplePlan, Verdict, Witness};
use crate::convex::{ConvexFunction, ExtendedReal, GridOracle};
use crate::error::{Error, Result};
use crate::phase_space::{j_apply, omega_unchecked, PhaseVector, SymplecticStructure};
use crate::sampling::{rng, uniform_box};

type TripleFn = dyn Fn(&PhaseVector, &PhaseVector, &PhaseVector) -> f64 + Send + Sync;
type InfoFn = dyn Fn(&PhaseVector, &PhaseVector, &PhaseVector) -> ExtendedReal + Send + Sync;

/// User-supplied likelihood.
#[derive(Clone)]
pub struct CustomLikelihood {
    pi: Arc<TripleFn>,
    info: Option<Arc<InfoFn>>,
}

impl fmt::Debug for CustomLikelihood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLikelihood")
            .field("closed_form_info", &self.info.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum LikelihoodKind {
    /// `pi_max(z', z'')`, ignoring `z`.
    Maximal,
    Constant(f64),
    /// `exp(-(phi^{*w}(z') + phi(z'') - w(z', z'')))`.
    Separable(ConvexFunction),
    Custom(CustomLikelihood),
}

#[derive(Debug, Clone)]
pub struct Likelihood {
    n: usize,
    name: String,
    kind: LikelihoodKind,
}

/// `exp(min{0, w(z', z'')})`
pub fn maximal_likelihood(
    s: &SymplecticStructure,
    z_prime: &PhaseVector,
    z_second: &PhaseVector,
) -> Result<f64> {
    Ok(s.omega(z_prime, z_second)?.min(0.0).exp())
}

/// `-ln pi` with `-ln 0 = +inf`.
pub fn information_from_value(pi: f64) -> Result<ExtendedReal> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::NotLikelihoodValue(pi));
    }
    if pi == 0.0 {
        Ok(ExtendedReal::INFINITY)
    } else {
        // -ln 1 is -0.0; report +0.
        Ok(ExtendedReal::of((-pi.ln()).max(0.0)))
    }
}

impl Likelihood {
    pub fn maximal(s: &SymplecticStructure) -> Self {
        Self {
            n: s.half_dim(),
            name: "maximal".into(),
            kind: LikelihoodKind::Maximal,
        }
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::NotLikelihoodValue(value));
        }
        Ok(Self {
            n,
            name: format!("constant({value})"),
            kind: LikelihoodKind::Constant(value),
        })
    }

    pub fn separable(s: &SymplecticStructure, phi: ConvexFunction) -> Result<Self> {
        if phi.half_dim() != s.half_dim() {
            return Err(Error::DimensionMismatch {
                expected: s.half_dim(),
                found: phi.half_dim(),
            });
        }
        if !phi.has_closed_form_conjugate() {
            return Err(Error::NoClosedForm(format!("symplectic polar of {}", phi.name())));
        }
        Ok(Self {
            n: s.half_dim(),
            name: format!("separable({})", phi.name()),
            kind: LikelihoodKind::Separable(phi),
        })
    }

    pub fn custom(
        n: usize,
        name: impl Into<String>,
        pi: impl Fn(&PhaseVector, &PhaseVector, &PhaseVector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            name: name.into(),
            kind: LikelihoodKind::Custom(CustomLikelihood {
                pi: Arc::new(pi),
                info: None,
            }),
        }
    }

    /// Attaches an analytic information content to a custom likelihood.
    pub fn with_information(
        mut self,
        info: impl Fn(&PhaseVector, &PhaseVector, &PhaseVector) -> ExtendedReal + Send + Sync + 'static,
    ) -> Self {
        match &mut self.kind {
            LikelihoodKind::Custom(c) => c.info = Some(Arc::new(info)),
            _ => panic!("closed-form information only attaches to custom likelihoods"),
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &LikelihoodKind {
        &self.kind
    }

    fn check(&self, zs: [&PhaseVector; 3]) -> Result<()> {
        zs.iter().try_for_each(|z| z.ensure_dim(self.n))
    }

    pub fn pi(&self, z: &PhaseVector, z_prime: &PhaseVector, z_second: &PhaseVector) -> Result<f64> {
        self.check([z, z_prime, z_second])?;
        Ok(self.pi_unchecked(z, z_prime, z_second))
    }

    pub(crate) fn pi_unchecked(&self, z: &PhaseVector, zp: &PhaseVector, zs: &PhaseVector) -> f64 {
        match &self.kind {
            LikelihoodKind::Maximal => omega_unchecked(zp, zs).min(0.0).exp(),
            LikelihoodKind::Constant(c) => *c,
            LikelihoodKind::Separable(_) => {
                let i = self.closed_info(z, zp, zs).expect("separable info");
                (-i.value()).exp().min(1.0)
            }
            LikelihoodKind::Custom(c) => (c.pi)(z, zp, zs),
        }
    }

    fn closed_info(&self, z: &PhaseVector, zp: &PhaseVector, zs: &PhaseVector) -> Option<ExtendedReal> {
        match &self.kind {
            LikelihoodKind::Maximal => Some(ExtendedReal::of((-omega_unchecked(zp, zs)).max(0.0))),
            LikelihoodKind::Constant(_) => None,
            LikelihoodKind::Separable(phi) => {
                let polar = phi.conjugate(&j_apply(zp)).expect("closed form checked at build");
                let sum = polar + phi.eval(zs);
                Some(match sum.finite() {
                    Some(v) => ExtendedReal::of((v - omega_unchecked(zp, zs)).max(0.0)),
                    None => ExtendedReal::INFINITY,
                })
            }
            LikelihoodKind::Custom(c) => c.info.as_ref().map(|f| f(z, zp, zs)),
        }
    }

    pub(crate) fn info_unchecked(
        &self,
        z: &PhaseVector,
        zp: &PhaseVector,
        zs: &PhaseVector,
    ) -> Result<ExtendedReal> {
        let pi = self.pi_unchecked(z, zp, zs);
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::NotLikelihoodValue(pi));
        }
        match self.closed_info(z, zp, zs) {
            Some(i) => Ok(i),
            None => information_from_value(pi),
        }
    }
}

/// `I(z, z', z'') = -ln pi(z, z', z'')`, preferring the closed form.
pub fn information_content(
    l: &Likelihood,
    z: &PhaseVector,
    z_prime: &PhaseVector,
    z_second: &PhaseVector,
) -> Result<ExtendedReal> {
    l.check([z, z_prime, z_second])?;
    l.info_unchecked(z, z_prime, z_second)
}

/// Outcome of the sampled likelihood checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    /// `0 <= pi <= 1` at every sampled point.
    pub range: Verdict,
    pub axiom_a: Verdict,
    pub axiom_b: Verdict,
    pub tempered: Option<Verdict>,
    pub samples_used: usize,
    /// Maxima not attained inside the grid, counted as passes under the
    /// standard variant.
    pub inconclusive: usize,
    pub grid_half_width: f64,
    pub grid_resolution: usize,
    pub variant: AxiomVariant,
}

impl LikelihoodReport {
    /// Axioms (a) and (b), plus the value range.
    pub fn is_likelihood(&self) -> bool {
        self.range.pass && self.axiom_a.pass && self.axiom_b.pass
    }

    /// The first failing axiom as `(name, witness)`.
    pub fn first_failure(&self) -> Option<(&'static str, String)> {
        let axioms = [
            ("range", &self.range),
            ("a", &self.axiom_a),
            ("b", &self.axiom_b),
        ];
        axioms.into_iter().find(|(_, v)| !v.pass).map(|(name, v)| {
            let w = v
                .witnesses
                .first()
                .map(|w| w.to_string())
                .unwrap_or_else(|| "no witness recorded".into());
            (name, w)
        })
    }
}

const POINTS_CAP: f64 = 200_000.0;

/// Classified maximum of `pi` over one free slot.
struct SlotMax {
    value: f64,
    argmax: PhaseVector,
    /// The supremum may lie outside the box.
    unattained: bool,
}

fn effective_resolution(plan: &SamplePlan, n: usize) -> usize {
    let cap = POINTS_CAP.powf(1.0 / (2 * n) as f64).floor() as usize;
    plan.grid_resolution.min(cap).max(3)
}

fn compass_refine(
    objective: &mut dyn FnMut(&PhaseVector) -> f64,
    start: PhaseVector,
    start_value: f64,
    step: f64,
    lo: f64,
    hi: f64,
) -> (f64, PhaseVector) {
    let dim = 2 * start.half_dim();
    let mut x = start;
    let mut best = start_value;
    let mut h = step;
    let mut rounds = 0;
    while h > 1e-10 && rounds < 20_000 {
        rounds += 1;
        let mut improved = false;
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut cand = x.clone();
                cand.set(i, (x.get(i) + sign * h).clamp(lo, hi));
                let v = objective(&cand);
                if v > best {
                    best = v;
                    x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, x)
}

fn slot_maximum(
    n: usize,
    half_width: f64,
    resolution: usize,
    objective: &mut dyn FnMut(&PhaseVector) -> f64,
) -> Result<SlotMax> {
    let grid = GridOracle::cube(n, -half_width, half_width, resolution);
    let mut interior: Option<(f64, PhaseVector)> = None;
    let mut boundary: Option<(f64, PhaseVector)> = None;
    grid.for_each_point(n, |z, edge| {
        let v = objective(z);
        let slot = if edge { &mut boundary } else { &mut interior };
        if slot.as_ref().is_none_or(|(b, _)| v > *b) {
            *slot = Some((v, z.clone()));
        }
        Ok(())
    })?;
    let spacing = grid.spacing();
    let refine = |slot: Option<(f64, PhaseVector)>, objective: &mut dyn FnMut(&PhaseVector) -> f64| {
        slot.map(|(v, z)| compass_refine(objective, z, v, spacing, -half_width, half_width))
    };
    let interior = refine(interior, objective);
    let boundary = refine(boundary, objective).expect("grid has a boundary");
    let at_edge = |z: &PhaseVector| {
        (0..2 * n).any(|i| (z.get(i).abs() - half_width).abs() <= 1e-12 * half_width.max(1.0))
    };
    // Prefer a maximiser away from the box edge on ties; a supremum reached
    // only at the edge may lie outside the box.
    let best = match interior {
        Some((vi, zi)) if vi + 1e-9 >= boundary.0 && !at_edge(&zi) => (vi.max(boundary.0), zi),
        Some((vi, zi)) if vi > boundary.0 => (vi, zi),
        _ => boundary,
    };
    Ok(SlotMax {
        unattained: at_edge(&best.1),
        value: best.0,
        argmax: best.1,
    })
}

fn classify_max(value: f64) -> bool {
    value.abs() <= 1e-6 || (value - 1.0).abs() <= 1e-6
}

/// Sampled test of the likelihood axioms and of temperedness.
pub fn check_likelihood_axioms(
    l: &Likelihood,
    s: &SymplecticStructure,
    plan: &SamplePlan,
) -> Result<LikelihoodReport> {
    let n = s.half_dim();
    if l.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: l.n,
        });
    }
    let mut rng = rng(plan.seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| uniform_box(rng, n, plan.half_width);
    let mut range = Verdict::new();
    let mut axiom_a = Verdict::new();
    let mut axiom_b = Verdict::new();
    let mut used = 0usize;
    let mut inconclusive = 0usize;
    let resolution = effective_resolution(plan, n);

    let note_range = |range: &mut Verdict, z: &PhaseVector, zp: &PhaseVector, zs: &PhaseVector, pi: f64| {
        if !(0.0..=1.0).contains(&pi) || pi.is_nan() {
            range.fail(Witness {
                z: z.clone(),
                z_prime: zp.clone(),
                z_second: zs.clone(),
                defect: if pi > 1.0 { pi - 1.0 } else { -pi },
                note: format!("pi = {pi} outside [0, 1]"),
            });
        }
    };

    // Axiom (a): maxima over each free slot are 0 or 1.
    for _ in 0..plan.anchors {
        let z = draw(&mut rng);
        let fixed_a = draw(&mut rng);
        let fixed_b = match plan.variant {
            AxiomVariant::Standard => draw(&mut rng),
            AxiomVariant::Earlier => fixed_a.clone(),
        };
        for third_slot in [true, false] {
            let fixed = if third_slot { &fixed_a } else { &fixed_b };
            let mut evals = 0usize;
            let mut out_of_range: Option<(PhaseVector, f64)> = None;
            let mut objective = |v: &PhaseVector| {
                evals += 1;
                let pi = if third_slot {
                    l.pi_unchecked(&z, fixed, v)
                } else {
                    l.pi_unchecked(&z, v, fixed)
                };
                if out_of_range.is_none() && !(0.0..=1.0).contains(&pi) {
                    out_of_range = Some((v.clone(), pi));
                }
                if pi.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    pi
                }
            };
            let m = slot_maximum(n, plan.grid_half_width, resolution, &mut objective)?;
            used += evals;
            if let Some((v, pi)) = out_of_range {
                let (zp, zs) = if third_slot { (fixed.clone(), v) } else { (v, fixed.clone()) };
                note_range(&mut range, &z, &zp, &zs, pi);
            }
            let (zp, zs) = if third_slot {
                (fixed.clone(), m.argmax.clone())
            } else {
                (m.argmax.clone(), fixed.clone())
            };
            let slot_name = if third_slot { "third" } else { "second" };
            if classify_max(m.value) {
                continue;
            }
            if m.unattained {
                match plan.variant {
                    AxiomVariant::Standard => inconclusive += 1,
                    AxiomVariant::Earlier => axiom_a.fail(Witness {
                        z: z.clone(),
                        z_prime: zp,
                        z_second: zs,
                        defect: m.value,
                        note: format!("maximum over the {slot_name} slot not attained in bounds"),
                    }),
                }
                continue;
            }
            axiom_a.fail(Witness {
                z: z.clone(),
                z_prime: zp,
                z_second: zs,
                defect: m.value.min((m.value - 1.0).abs()),
                note: format!("maximum {} over the {slot_name} slot is neither 0 nor 1", m.value),
            });
        }
    }

    // Axiom (b): -ln pi convex in each slot along segments.
    for _ in 0..plan.segments {
        let z = draw(&mut rng);
        let fixed = draw(&mut rng);
        let v1 = draw(&mut rng);
        let v2 = draw(&mut rng);
        for third_slot in [true, false] {
            let t = uniform_t(&mut rng);
            let mid = &v1.scale(t) + &v2.scale(1.0 - t);
            let info = |v: &PhaseVector| -> Result<ExtendedReal> {
                if third_slot {
                    l.info_unchecked(&z, &fixed, v)
                } else {
                    l.info_unchecked(&z, v, &fixed)
                }
            };
            used += 3;
            let vals: Vec<_> = [&v1, &v2, &mid].iter().map(|v| info(v)).collect();
            let mut bad = None;
            for (v, r) in [&v1, &v2, &mid].iter().zip(&vals) {
                if let Err(Error::NotLikelihoodValue(pi)) = r {
                    bad = Some(((*v).clone(), *pi));
                }
            }
            if let Some((v, pi)) = bad {
                let (zp, zs) = if third_slot { (fixed.clone(), v) } else { (v, fixed.clone()) };
                note_range(&mut range, &z, &zp, &zs, pi);
                continue;
            }
            let (i1, i2, im) = (vals[0].clone()?, vals[1].clone()?, vals[2].clone()?);
            let Some(rhs) = (i1.finite().zip(i2.finite())).map(|(a, b)| t * a + (1.0 - t) * b) else {
                continue;
            };
            let excess = match im.finite() {
                Some(m) => m - rhs,
                None => f64::INFINITY,
            };
            if excess > plan.tol * rhs.abs().max(1.0) {
                let (zp, zs) = if third_slot { (fixed.clone(), mid) } else { (mid, fixed.clone()) };
                axiom_b.fail(Witness {
                    z: z.clone(),
                    z_prime: zp,
                    z_second: zs,
                    defect: excess,
                    note: format!(
                        "-ln pi not convex in the {} slot at t = {t}",
                        if third_slot { "third" } else { "second" }
                    ),
                });
            }
        }
    }

    let tempered = tempered_verdict(l, s, plan, &mut used);
    Ok(LikelihoodReport {
        range,
        axiom_a,
        axiom_b,
        tempered: Some(tempered),
        samples_used: used,
        inconclusive,
        grid_half_width: plan.grid_half_width,
        grid_resolution: resolution,
        variant: plan.variant,
    })
}

fn tempered_verdict(l: &Likelihood, s: &SymplecticStructure, plan: &SamplePlan, used: &mut usize) -> Verdict {
    let n = s.half_dim();
    let mut rng = rng(plan.seed ^ 0x7e4d_e4ed);
    let mut verdict = Verdict::new();
    for _ in 0..plan.samples {
        let z = uniform_box(&mut rng, n, plan.half_width);
        let zp = uniform_box(&mut rng, n, plan.half_width);
        let zs = uniform_box(&mut rng, n, plan.half_width);
        *used += 1;
        let pi = l.pi_unchecked(&z, &zp, &zs);
        let bound = omega_unchecked(&zp, &zs).min(0.0).exp();
        if !(pi <= bound + 1e-12) {
            verdict.fail(Witness {
                z,
                z_prime: zp,
                z_second: zs,
                defect: pi - bound,
                note: "pi exceeds pi_max".into(),
            });
        }
    }
    verdict
}

/// Sampled test of `pi <= pi_max` with slack `1e-12`.
pub fn is_tempered(l: &Likelihood, s: &SymplecticStructure, plan: &SamplePlan) -> Result<bool> {
    if l.n != s.half_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.half_dim(),
            found: l.n,
        });
    }
    let mut used = 0;
    Ok(tempered_verdict(l, s, plan, &mut used).pass)
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
    fn maximal_likelihood_examples() {
        let s = s1();
        let a = z(0.7, -1.3);
        assert_eq!(maximal_likelihood(&s, &a, &a.scale(2.0)).unwrap(), 1.0);
        assert_eq!(maximal_likelihood(&s, &z(1.0, 0.0), &z(0.0, 0.5)).unwrap(), 1.0);
        let v = maximal_likelihood(&s, &z(2.0, 0.0), &z(0.0, -1.0)).unwrap();
        assert_abs_diff_eq!(v, (-2.0f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(v, 0.135335, epsilon = 1e-6);
        assert!(maximal_likelihood(&s, &z(1.0, 0.0), &PhaseVector::zeros(2)).is_err());
    }

    #[test]
    fn information_examples() {
        assert_eq!(information_from_value(1.0).unwrap(), ExtendedReal::ZERO);
        assert_eq!(information_from_value(0.0).unwrap(), ExtendedReal::INFINITY);
        assert_abs_diff_eq!(
            information_from_value((-2.0f64).exp()).unwrap().value(),
            2.0,
            epsilon = 1e-15
        );
        let err = information_from_value(1.5).unwrap_err();
        assert_eq!(err.to_string(), "not a likelihood value: 1.5");
        let bad = Likelihood::custom(1, "too big", |_, _, _| 2.0);
        assert!(matches!(
            information_content(&bad, &z(0.0, 0.0), &z(0.0, 0.0), &z(0.0, 0.0)),
            Err(Error::NotLikelihoodValue(_))
        ));
    }

    #[test]
    fn maximal_is_a_tempered_likelihood() {
        let s = s1();
        let l = Likelihood::maximal(&s);
        let r = check_likelihood_axioms(&l, &s, &SamplePlan::quick()).unwrap();
        assert!(r.is_likelihood(), "{r:?}");
        assert!(r.tempered.as_ref().unwrap().pass);
        assert!(is_tempered(&l, &s, &SamplePlan::quick()).unwrap());
    }

    #[test]
    fn half_fails_axiom_a() {
        let s = s1();
        let l = Likelihood::constant(1, 0.5).unwrap();
        let r = check_likelihood_axioms(&l, &s, &SamplePlan::quick()).unwrap();
        assert!(!r.axiom_a.pass);
        assert!(r.axiom_b.pass);
        let w = &r.axiom_a.witnesses[0];
        assert!(w.note.contains("neither 0 nor 1"));
        assert_abs_diff_eq!(w.defect, 0.5, epsilon = 1e-12);
        assert_eq!(r.inconclusive, 0);
    }

    #[test]
    fn one_is_a_likelihood_but_not_tempered() {
        let s = s1();
        let l = Likelihood::constant(1, 1.0).unwrap();
        let r = check_likelihood_axioms(&l, &s, &SamplePlan::quick()).unwrap();
        assert!(r.is_likelihood());
        let t = r.tempered.unwrap();
        assert!(!t.pass);
        let w = &t.witnesses[0];
        assert!(s.omega(&w.z_prime, &w.z_second).unwrap() < 0.0);
        assert!(!is_tempered(&l, &s, &SamplePlan::quick()).unwrap());
    }

    #[test]
    fn separable_quadratic_likelihood() {
        let s = s1();
        let l = Likelihood::separable(&s, ConvexFunction::half_squared_norm(1)).unwrap();
        let r = check_likelihood_axioms(&l, &s, &SamplePlan::quick()).unwrap();
        assert!(r.is_likelihood(), "{r:?}");
        assert!(is_tempered(&l, &s, &SamplePlan::quick()).unwrap());
        // information is |J z' - z''|^2 / 2
        let zp = z(0.3, -0.4);
        let zs = z(1.0, 2.0);
        let jzp = s.j_map(&zp).unwrap();
        let expect = 0.5 * (&jzp - &zs).norm().powi(2);
        let got = information_content(&l, &z(0.0, 0.0), &zp, &zs).unwrap().value();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-14);
    }

    #[test]
    fn separable_needs_a_closed_form_polar() {
        let s = s1();
        let phi = ConvexFunction::custom(1, "opaque", |v| ExtendedReal::of(v.norm()));
        assert!(matches!(Likelihood::separable(&s, phi), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn nonconvex_information_fails_axiom_b() {
        let s = s1();
        // I = exp(-|v|^2) is concave near the origin
        let l = Likelihood::custom(1, "bump", |_, _, v| (-(-v.dot(v)).exp()).exp());
        let r = check_likelihood_axioms(&l, &s, &SamplePlan::quick()).unwrap();
        assert!(!r.axiom_b.pass);
        assert!(r.first_failure().is_some());
    }

    #[test]
    fn unattained_maximum_is_inconclusive_unless_earlier_variant() {
        let s = s1();
        // pi grows toward the box edge and never reaches 1: sup only at infinity
        let l = Likelihood::custom(1, "ramp", |_, _, v| {
            let r2 = v.dot(v);
            r2 / (1.0 + r2) * 0.5
        });
        let mut plan = SamplePlan::quick();
        plan.segments = 0;
        let r = check_likelihood_axioms(&l, &s, &plan).unwrap();
        // third-slot maxima sit on the box edge; second-slot maxima are
        // constants in (0, 1/2) and fail outright
        assert!(r.inconclusive > 0);
        assert!(!r.axiom_a.pass);
        let strict = check_likelihood_axioms(&l, &s, &plan.clone().with_variant(AxiomVariant::Earlier)).unwrap();
        assert!(!strict.axiom_a.pass);
        assert!(strict
            .axiom_a
            .witnesses
            .iter()
            .any(|w| w.note.contains("not attained")));
    }
}
