//! Deterministic weight initialization.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Seeded initializer; every tensor draw advances one private ChaCha stream,
/// so a (seed, construction order) pair fully determines all weights.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Standard normal draw via Box–Muller (keeps the dependency surface small).
    fn normal(&mut self) -> f64 {
        let u1: f64 = self.rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// He-normal tensor: std = sqrt(2 / fan_in).
    pub fn he_normal<S: Real>(&mut self, shape: &[usize], fan_in: usize) -> ArrayD<S> {
        let std = (2.0 / fan_in as f64).sqrt();
        let mut out = ArrayD::zeros(IxDyn(shape));
        for v in out.iter_mut() {
            *v = S::from_f64_c(self.normal() * std);
        }
        out
    }

    /// Glorot-uniform tensor over [-limit, limit], limit = sqrt(6/(fan_in+fan_out)).
    pub fn glorot_uniform<S: Real>(
        &mut self,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
    ) -> ArrayD<S> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut out = ArrayD::zeros(IxDyn(shape));
        for v in out.iter_mut() {
            *v = S::from_f64_c(self.rng.gen_range(-limit..=limit));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let a: ArrayD<f32> = Initializer::new(3).he_normal(&[8, 4, 3, 3], 36);
        let b: ArrayD<f32> = Initializer::new(3).he_normal(&[8, 4, 3, 3], 36);
        let c: ArrayD<f32> = Initializer::new(4).he_normal(&[8, 4, 3, 3], 36);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn he_std_is_roughly_right() {
        let w: ArrayD<f64> = Initializer::new(0).he_normal(&[64, 64, 3, 3], 576);
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expected = 2.0 / 576.0;
        assert!((var / expected - 1.0).abs() < 0.1);
    }
}
