//! Deterministic quasirandom and seeded random sample streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// The `index`-th point of the Halton sequence in `[0,1)^dim`.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dimensions", PRIMES.len());
    (0..dim).map(|d| radical_inverse(index as u64, PRIMES[d])).collect()
}

/// Halton points with a seeded Cranley–Patterson rotation, so different seeds
/// give independent-looking but reproducible point sets.
pub struct ShiftedHalton {
    shift: Vec<f64>,
    next: usize,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ShiftedHalton { shift: (0..dim).map(|_| rng.random::<f64>()).collect(), next: 1 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let h = halton(self.next, self.shift.len());
        self.next += 1;
        h.iter().zip(&self.shift).map(|(a, b)| (a + b).fract()).collect()
    }
}

/// Seeded generator used for every random draw in the library.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random unit vector in ℝᵈ.
pub fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 1), vec![0.5]);
        assert_eq!(halton(2, 1), vec![0.25]);
        assert_eq!(halton(3, 2), vec![0.75, 1.0 / 9.0]);
    }

    #[test]
    fn unit_vectors_are_unit_and_reproducible() {
        let mut a = rng(3);
        let mut b = rng(3);
        let u = unit_vector(&mut a, 5);
        let v = unit_vector(&mut b, 5);
        assert_eq!(u, v);
        assert!((u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
