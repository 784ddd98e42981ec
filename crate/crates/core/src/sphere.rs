//! Deterministic samples of the unit sphere `S^{m−2} ⊂ R^{m−1}`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seed used for sphere samples in dimension `m >= 5`.
pub const SPHERE_SEED: u64 = 0x5eed_5a3e;

/// `n` unit vectors in `R^{m−1}`: equispaced angles for `m = 3`, a Fibonacci
/// lattice for `m = 4`, seeded Gaussian samples above.
pub fn sphere_samples(m: usize, n: usize) -> Result<Vec<DVector<f64>>> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "sphere samples need m >= 3, got {m}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    Ok(match m {
        3 => (0..n)
            .map(|i| angle_vector(2.0 * PI * i as f64 / n as f64))
            .collect(),
        4 => fibonacci(n),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(SPHERE_SEED ^ (m as u64) << 32 ^ n as u64);
            (0..n).map(|_| random_unit(m - 1, &mut rng)).collect()
        }
    })
}

/// `(cos θ, sin θ)`.
pub fn angle_vector(theta: f64) -> DVector<f64> {
    let (s, c) = theta.sin_cos();
    DVector::from_vec(vec![c, s])
}

fn fibonacci(n: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Uniformly distributed unit vector in `R^d`.
pub fn random_unit<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}
