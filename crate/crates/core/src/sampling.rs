//! Seeded i.i.d. input sampling.
//!
//! All randomness comes from ChaCha8 streams. A run is identified by a base
//! seed; sub-streams (replicate, cross-validation split, ...) are derived by
//! mixing tags into the seed with SplitMix64, so a single replicate can be
//! regenerated without replaying the others.
//!
//! Draw conventions (frozen):
//! - uniforms on the open interval (0,1) are `((next_u64 >> 11) + 0.5) / 2^53`;
//! - `UniformSym` is `2U - 1`;
//! - `Arcsine` is `cos(πU)`;
//! - `GaussianStd` is the inverse normal CDF of U.
//!
//! Samples are drawn row by row (sample-major, coordinate-minor).

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::PolynomialFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDistribution {
    GaussianStd,
    UniformSym,
    Arcsine,
}

impl InputDistribution {
    /// The basis family orthonormal under this distribution.
    pub fn family(self) -> PolynomialFamily {
        match self {
            InputDistribution::GaussianStd => PolynomialFamily::Hermite,
            InputDistribution::UniformSym => PolynomialFamily::Legendre,
            InputDistribution::Arcsine => PolynomialFamily::Chebyshev1,
        }
    }

    pub fn for_family(family: PolynomialFamily) -> Self {
        match family {
            PolynomialFamily::Hermite => InputDistribution::GaussianStd,
            PolynomialFamily::Legendre => InputDistribution::UniformSym,
            PolynomialFamily::Chebyshev1 => InputDistribution::Arcsine,
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            InputDistribution::GaussianStd => Normal::standard().cdf(x),
            InputDistribution::UniformSym => ((x + 1.0) / 2.0).clamp(0.0, 1.0),
            InputDistribution::Arcsine => {
                if x <= -1.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    1.0 - x.acos() / std::f64::consts::PI
                }
            }
        }
    }

    /// Map an open-interval uniform draw to this distribution.
    pub fn transform(self, u: f64) -> f64 {
        match self {
            InputDistribution::GaussianStd => Normal::standard().inverse_cdf(u),
            InputDistribution::UniformSym => 2.0 * u - 1.0,
            InputDistribution::Arcsine => (std::f64::consts::PI * u).cos(),
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a path of tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(base), |acc, &t| mix64(acc ^ mix64(t)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw on (0, 1), never exactly 0 or 1.
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// M×d matrix of i.i.d. draws.
pub fn sample_inputs(dist: InputDistribution, d: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    sample_inputs_from(dist, d, m, &mut rng)
}

pub fn sample_inputs_from(
    dist: InputDistribution,
    d: usize,
    m: usize,
    rng: &mut impl RngCore,
) -> DMatrix<f64> {
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m * d {
        data.push(dist.transform(open_unit(rng)));
    }
    DMatrix::from_row_slice(m, d, &data)
}

/// Random permutation of 0..n (Fisher–Yates on the given stream).
pub fn permutation(n: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        p.swap(i, j);
    }
    p
}
