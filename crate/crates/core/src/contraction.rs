//! Normal contractions and the energy inequality they satisfy on graphs.
//!
//! `F: ℝ^k → ℝ` is a normal contraction when `F(0) = 0` and
//! `|F(x) - F(y)| <= Σ_i |x_i - y_i|`. On a graph with nonnegative `c` and
//! `κ` this gives `E(F(f_1, …, f_k))^{1/2} <= Σ_i E(f_i)^{1/2}`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// `(x ∧ 1) ∨ 0`.
pub fn unit_contraction(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `|x| ∧ c`.
pub fn abs_cap(x: f64, c: f64) -> f64 {
    libm::fabs(x).min(c)
}

/// A piecewise linear `h: ℝ → ℝ` with `h(0) = 0` and slopes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    knots: Vec<f64>,
    slopes: Vec<f64>,
}

impl Profile {
    /// `slopes[j]` applies on `(knots[j-1], knots[j])`, with open ends.
    pub fn new(mut knots: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != knots.len() + 1 {
            return Err(Error::Dimension {
                expected: knots.len() + 1,
                got: slopes.len(),
            });
        }
        if slopes.iter().any(|s| !(libm::fabs(*s) <= 1.0)) {
            return Err(Error::Domain("slopes must lie in [-1, 1]".into()));
        }
        knots.sort_by(f64::total_cmp);
        Ok(Self { knots, slopes })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, pieces: usize) -> Self {
        let knots = (0..pieces.saturating_sub(1)).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let slopes = (0..pieces.max(1)).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self::new(knots, slopes).expect("valid by construction")
    }

    fn primitive(&self, x: f64) -> f64 {
        // Antiderivative of the slope, zero at the leftmost knot.
        let mut acc = 0.0;
        let mut left = match self.knots.first() {
            Some(&k) if x < k => return self.slopes[0] * (x - k),
            Some(&k) => k,
            None => return self.slopes[0] * x,
        };
        for (j, &right) in self.knots.iter().enumerate().skip(1) {
            if x <= right {
                return acc + self.slopes[j] * (x - left);
            }
            acc += self.slopes[j] * (right - left);
            left = right;
        }
        acc + self.slopes[self.knots.len()] * (x - left)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.primitive(x) - self.primitive(0.0)
    }
}

/// Randomizable families of normal contractions in up to a few variables.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalContraction {
    /// `h(a·x)` with `|a_i| <= 1`.
    Ridge { weights: Vec<f64>, profile: Profile },
    /// `max_i h_i(x_i)`.
    Max { profiles: Vec<Profile> },
}

impl NormalContraction {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, arity: usize) -> Self {
        let pieces = rng.gen_range(1..=4);
        if rng.gen_bool(0.5) {
            NormalContraction::Ridge {
                weights: (0..arity).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
                profile: Profile::random(rng, pieces),
            }
        } else {
            NormalContraction::Max {
                profiles: (0..arity).map(|_| Profile::random(rng, pieces)).collect(),
            }
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            NormalContraction::Ridge { weights, .. } => weights.len(),
            NormalContraction::Max { profiles } => profiles.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            NormalContraction::Ridge { weights, profile } => {
                profile.eval(weights.iter().zip(x).map(|(a, v)| a * v).sum())
            }
            NormalContraction::Max { profiles } => profiles
                .iter()
                .zip(x)
                .map(|(h, &v)| h.eval(v))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Both sides of `E(F(f_1, …, f_k))^{1/2} <= Σ_i E(f_i)^{1/2}` on a graph.
pub fn contraction_sides(graph: &WeightedGraph, contraction: &NormalContraction, inputs: &[&[f64]]) -> Result<(f64, f64)> {
    if inputs.len() != contraction.arity() {
        return Err(Error::Dimension {
            expected: contraction.arity(),
            got: inputs.len(),
        });
    }
    let n = graph.len();
    let mut x = Vec::with_capacity(inputs.len());
    let mut out = Vec::with_capacity(n);
    for v in 0..n {
        x.clear();
        for f in inputs {
            if f.len() != n {
                return Err(Error::Dimension { expected: n, got: f.len() });
            }
            x.push(f[v]);
        }
        out.push(contraction.eval(&x));
    }
    let lhs = libm::sqrt(graph.energy(&out)?.max(0.0));
    let mut rhs = 0.0;
    for f in inputs {
        rhs += libm::sqrt(graph.energy(f)?.max(0.0));
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_contractions() {
        assert_eq!(unit_contraction(-0.5), 0.0);
        assert_eq!(unit_contraction(0.25), 0.25);
        assert_eq!(unit_contraction(3.0), 1.0);
        assert_eq!(abs_cap(-3.0, 2.0), 2.0);
        assert_eq!(abs_cap(-1.0, 2.0), 1.0);
    }

    #[test]
    fn profile_is_anchored_and_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let h = Profile::random(&mut rng, 4);
            assert_eq!(h.eval(0.0), 0.0);
            let (a, b) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            assert!((h.eval(a) - h.eval(b)).abs() <= (a - b).abs() + 1e-12);
        }
    }

    #[test]
    fn profile_matches_hand_values() {
        // slope 1 left of -1, -1 on (-1, 2), 0.5 right of 2
        let h = Profile::new(alloc::vec![2.0, -1.0], alloc::vec![1.0, -1.0, 0.5]).unwrap();
        assert_eq!(h.eval(1.0), -1.0);
        assert_eq!(h.eval(-1.0), 1.0);
        assert_eq!(h.eval(-3.0), -1.0);
        assert_eq!(h.eval(4.0), -1.0);
    }

    #[test]
    fn random_contractions_vanish_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for arity in 1..=3 {
            for _ in 0..50 {
                let f = NormalContraction::random(&mut rng, arity);
                assert_eq!(f.eval(&alloc::vec![0.0; arity]), 0.0);
            }
        }
    }
}
