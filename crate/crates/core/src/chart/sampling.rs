use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// A coordinate chart: names, a closed sampling box and a seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    domain: Vec<(f64, f64)>,
    seed: u64,
}

impl Chart {
    pub const MIN_DIM: usize = 2;
    pub const MAX_DIM: usize = 6;

    pub fn new(names: Vec<String>, domain: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        let n = names.len();
        if !(Self::MIN_DIM..=Self::MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension {
                n,
                reason: "charts support 2 <= n <= 6",
            });
        }
        if domain.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} coordinates but {} domain intervals",
                domain.len()
            )));
        }
        for (name, (lo, hi)) in names.iter().zip(&domain) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(vec![format!(
                    "domain of {name} must be a finite interval with lo < hi, got [{lo}, {hi}]"
                )]));
            }
        }
        Ok(Chart {
            names,
            domain,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Chart {
            seed,
            ..self.clone()
        }
    }

    /// `count` points of a Halton sequence over the domain box, rotated by a
    /// seed-dependent shift (Cranley–Patterson). Deterministic in the seed.
    pub fn samples(&self, count: usize) -> Vec<Vec<f64>> {
        halton_box(&self.domain, count, self.seed)
    }
}

pub(crate) fn halton_box(domain: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(domain.len() <= PRIMES.len(), "too many dimensions for Halton bases");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = domain.iter().map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|k| {
            domain
                .iter()
                .zip(PRIMES)
                .zip(&shifts)
                .map(|(((lo, hi), base), shift)| {
                    let u = (radical_inverse(k, base) + shift).fract();
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect()
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    r
}
