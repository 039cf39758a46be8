//! Seeded potential families used by the verification suites.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fourier::Potential;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `2a·cos 2πx`
    SingleGap { a: f64 },
    /// `a·cos(2πx + φ₁) + b·cos(4πx + φ₂)`
    TwoGap { a: f64, b: f64, phase_a: f64, phase_b: f64 },
    /// `|q̂ₙ| = scale·n^{−decay}·ρₙ`, `ρₙ ∈ [½, 1]`, random phases, `1 ≤ n ≤ k`.
    RandomEnvelope { k: usize, decay: f64, scale: f64, seed: u64 },
    /// Uniformly random coefficients rescaled to a given `L²` norm.
    RandomL2 { k: usize, l2: f64, seed: u64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SingleGap { .. } => "single_gap",
            Family::TwoGap { .. } => "two_gap",
            Family::RandomEnvelope { .. } => "random_envelope",
            Family::RandomL2 { .. } => "random_l2",
        }
    }

    /// The envelope family for Sobolev index `big_n`: `|q̂ₙ| ∝ n^{−N−1}`.
    pub fn envelope(k: usize, big_n: u32, scale: f64, seed: u64) -> Self {
        Family::RandomEnvelope { k, decay: big_n as f64 + 1.0, scale, seed }
    }

    pub fn potential(&self) -> Potential {
        match *self {
            Family::SingleGap { a } => Potential::zero().with_trig(1, 2.0 * a, 0.0),
            Family::TwoGap { a, b, phase_a, phase_b } => Potential::new(
                0.0,
                vec![Complex64::from_polar(a / 2.0, phase_a), Complex64::from_polar(b / 2.0, phase_b)],
            ),
            Family::RandomEnvelope { k, decay, scale, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pos = (1..=k)
                    .map(|n| {
                        let rho: f64 = rng.gen_range(0.5..=1.0);
                        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
                        Complex64::from_polar(scale * rho * (n as f64).powf(-decay), phase)
                    })
                    .collect();
                Potential::new(0.0, pos)
            }
            Family::RandomL2 { k, l2, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pos: Vec<Complex64> =
                    (0..k).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let p = Potential::new(0.0, pos);
                p.scale(l2 / p.l2())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_deterministic_and_mean_free() {
        let f = Family::envelope(8, 1, 0.5, 7);
        assert_eq!(f.potential(), f.potential());
        assert_eq!(f.potential().mean, 0.0);
        let g = Family::RandomL2 { k: 8, l2: 0.9, seed: 3 }.potential();
        assert!((g.l2() - 0.9).abs() < 1e-14);
        let s = Family::SingleGap { a: 0.1 }.potential();
        assert!((s.coeff(1).re - 0.1).abs() < 1e-16);
    }
}
