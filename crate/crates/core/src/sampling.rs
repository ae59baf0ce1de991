//! Low-discrepancy sampling for screening and initialization.
//!
//! A scrambled Halton sequence: the classic radical-inverse construction
//! with a seeded Cranley-Patterson rotation so that distinct seeds give
//! distinct (but still reproducible) point sets.

use rand::Rng;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `n` in the given base, in [0, 1).
pub fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while n > 0 {
        result += (n % base) as f64 * f;
        n /= base;
        f /= base as f64;
    }
    result
}

/// Streaming Halton sampler over the unit box `[0,1)^d`.
pub struct HaltonSampler {
    dim: usize,
    shift: Vec<f64>,
    index: u64,
}

impl HaltonSampler {
    /// Seeded sampler; the rotation shift is drawn from `rng`.
    pub fn new(dim: usize, rng: &mut impl Rng) -> Self {
        assert!(dim <= PRIMES.len(), "halton sampler supports up to 12 dims");
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Self {
            dim,
            shift,
            index: 0,
        }
    }

    /// Unshifted sampler (pure radical-inverse sequence).
    pub fn unshifted(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "halton sampler supports up to 12 dims");
        Self {
            dim,
            shift: vec![0.0; dim],
            index: 0,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        (0..self.dim)
            .map(|d| {
                let v = radical_inverse(self.index, PRIMES[d]) + self.shift[d];
                v - v.floor()
            })
            .collect()
    }

    pub fn take_points(&mut self, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.next_point()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn points_stay_in_unit_box_and_fill_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = HaltonSampler::new(2, &mut rng);
        let pts = s.take_points(512);
        assert!(pts
            .iter()
            .all(|p| p.iter().all(|&x| (0.0..1.0).contains(&x))));
        // Crude uniformity check: each quadrant gets a fair share.
        let mut counts = [0usize; 4];
        for p in &pts {
            let q = (p[0] >= 0.5) as usize * 2 + (p[1] >= 0.5) as usize;
            counts[q] += 1;
        }
        assert!(counts.iter().all(|&c| c > 96 && c < 160), "{counts:?}");
    }

    #[test]
    fn seeded_sampler_is_reproducible() {
        let mk = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            HaltonSampler::new(3, &mut rng).take_points(16)
        };
        assert_eq!(mk(), mk());
    }
}
