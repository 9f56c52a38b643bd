use rand::Rng;

use crate::geom::{laplace_eigenvalue, InvariantFunction};

/// Random admissible potential of degree `max_degree`.
///
/// Coefficients are scaled so that `Σ_k k(k+1)|c_k| = laplacian_bound`; since
/// `|P_k| ≤ 1` on [0, 1] this keeps `1 + Δ₀φ ≥ 1 − laplacian_bound`, so any
/// bound below 1 yields a Kähler potential.
pub fn random_potential<R: Rng + ?Sized>(
    rng: &mut R,
    max_degree: usize,
    laplacian_bound: f64,
) -> InvariantFunction {
    let mut coeffs: Vec<f64> = vec![0.0; max_degree + 1];
    coeffs[0] = rng.random_range(-1.0..1.0);
    for c in coeffs.iter_mut().skip(1) {
        *c = rng.random_range(-1.0..1.0);
    }
    let weight: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| -laplace_eigenvalue(k) * c.abs())
        .sum();
    let scale = if weight > 0.0 {
        laplacian_bound * rng.random_range(0.5..1.0) / weight
    } else {
        0.0
    };
    for c in coeffs.iter_mut().skip(1) {
        *c *= scale;
    }
    InvariantFunction::new(coeffs)
}

/// The list used by seeded runs: `count` potentials from one ChaCha stream.
pub fn seeded_potentials(seed: u64, count: usize) -> Vec<InvariantFunction> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_potential(&mut rng, 6, 0.6))
        .collect()
}
