//! Sampling plans and verdicts shared by the likelihood and bipotential
//! checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::phase_space::PhaseVector;
use crate::sampling::DirectionSampler;

/// Which form of the likelihood maximum axiom to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AxiomVariant {
    /// Maxima over the third slot at `(z, z')` and over the second slot at
    /// `(z, z'')`; maxima need not exist.
    #[default]
    Standard,
    /// Maxima over either free slot with the same fixed vector in the other;
    /// the maxima must exist.
    Earlier,
}

/// What to sample and how densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Random pairs or triples for pointwise inequalities.
    pub samples: usize,
    /// Segment probes per slot for convexity.
    pub segments: usize,
    /// Anchors for the maximum axiom.
    pub anchors: usize,
    /// Pairs for the contact-set equivalence.
    pub contact_pairs: usize,
    /// Samples are drawn from `[-half_width, half_width]^{2n}`.
    pub half_width: f64,
    /// Maximisation grid `[-grid_half_width, grid_half_width]^{2n}`.
    pub grid_half_width: f64,
    pub grid_resolution: usize,
    pub sampler: DirectionSampler,
    pub tol: f64,
    pub variant: AxiomVariant,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            samples: 10_000,
            segments: 500,
            anchors: 20,
            contact_pairs: 1000,
            half_width: 1.0,
            grid_half_width: 2.0,
            grid_resolution: 41,
            sampler: DirectionSampler::default().with_random(200),
            tol: 1e-9,
            variant: AxiomVariant::Standard,
            seed: 20_240_611,
        }
    }
}

impl SamplePlan {
    /// A cheaper plan for repeated use inside other checks.
    pub fn quick() -> Self {
        Self {
            samples: 1000,
            segments: 100,
            anchors: 6,
            contact_pairs: 100,
            sampler: DirectionSampler::default().with_random(50),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variant(mut self, variant: AxiomVariant) -> Self {
        self.variant = variant;
        self
    }
}

/// A concrete sample at which a check failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub z: PhaseVector,
    pub z_prime: PhaseVector,
    pub z_second: PhaseVector,
    pub defect: f64,
    pub note: String,
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} at z={:?}, z'={:?}, z''={:?} (defect {:e})",
            self.note,
            self.z.to_flat(),
            self.z_prime.to_flat(),
            self.z_second.to_flat(),
            self.defect
        )
    }
}

/// Pass/fail with the first few witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub witnesses: Vec<Witness>,
}

const MAX_WITNESSES: usize = 5;

impl Verdict {
    pub(crate) fn new() -> Self {
        Self {
            pass: true,
            witnesses: Vec::new(),
        }
    }

    pub(crate) fn fail(&mut self, w: Witness) {
        self.pass = false;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }
}

pub(crate) fn uniform_t<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(0.05..0.95)
}
