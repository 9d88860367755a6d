//! Seeded sampling helpers shared by the sampled checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::phase_space::PhaseVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from `[-half_width, half_width]^{2n}`.
pub fn uniform_box<R: Rng>(rng: &mut R, n: usize, half_width: f64) -> PhaseVector {
    let flat: Vec<f64> = (0..2 * n)
        .map(|_| rng.random_range(-half_width..=half_width))
        .collect();
    PhaseVector::from_flat(&flat).expect("even length")
}

/// Uniform direction on the unit sphere of `R^{2n}` (Marsaglia normalisation
/// of a Gaussian vector).
pub fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> PhaseVector {
    loop {
        let flat: Vec<f64> = (0..2 * n).map(|_| standard_normal(rng)).collect();
        let z = PhaseVector::from_flat(&flat).expect("even length");
        let r = z.norm();
        if r > 1e-12 {
            return z.scale(1.0 / r);
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller, one branch kept.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Probe directions for sampled first-order inequalities.
///
/// Always yields `+-e_i` at every radius, followed by `random` uniformly
/// oriented directions with log-uniform lengths in `[min radius, max radius]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSampler {
    pub radii: Vec<f64>,
    pub random: usize,
    pub seed: u64,
}

impl Default for DirectionSampler {
    fn default() -> Self {
        Self {
            radii: vec![1e-3, 1e-2, 0.1, 1.0],
            random: 1000,
            seed: 0x5eed_d1e5,
        }
    }
}

impl DirectionSampler {
    pub fn with_random(mut self, random: usize) -> Self {
        self.random = random;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn directions(&self, n: usize) -> Vec<PhaseVector> {
        let mut out = Vec::with_capacity(4 * n * self.radii.len() + self.random);
        for &r in &self.radii {
            for i in 0..2 * n {
                let e = PhaseVector::basis(n, i);
                out.push(e.scale(r));
                out.push(e.scale(-r));
            }
        }
        let lo = self.radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.radii.iter().cloned().fold(0.0, f64::max);
        let (lo, hi) = if lo.is_finite() && hi > 0.0 { (lo, hi) } else { (1e-3, 1.0) };
        let mut rng = rng(self.seed);
        for _ in 0..self.random {
            let d = unit_direction(&mut rng, n);
            let t: f64 = rng.random();
            let r = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
            out.push(d.scale(r));
        }
        out
    }
}
