//! Random physical covariance matrices with known symplectic spectrum.

use nalgebra::Matrix2;
use rand::Rng;

use crate::symplectic::CovarianceMatrix4;

/// A block CM with symplectic eigenvalues exactly `nu`.
///
/// A position-space transformation `S` acts on positions as `S` and on
/// momenta as `S^{-T}`, so `diag(nu)` maps to `S N S^T` (positions) and
/// `S^{-T} N S^{-1}` (momenta) without changing the spectrum.
pub fn cm_from_spectrum(s: &Matrix2<f64>, nu: (f64, f64)) -> Option<CovarianceMatrix4> {
    let n = Matrix2::new(nu.0, 0.0, 0.0, nu.1);
    let s_inv = s.try_inverse()?;
    let x = s * n * s.transpose();
    let p = s_inv.transpose() * n * s_inv;
    Some(CovarianceMatrix4::new_unchecked(
        x[(0, 0)],
        p[(0, 0)],
        x[(1, 1)],
        p[(1, 1)],
        0.5 * (x[(0, 1)] + x[(1, 0)]),
        0.5 * (p[(0, 1)] + p[(1, 0)]),
    ))
}

/// Draws a physical CM and returns it with its symplectic eigenvalues
/// `(nu_plus, nu_minus)`.
pub fn random_physical_cm<R: Rng + ?Sized>(rng: &mut R) -> (CovarianceMatrix4, (f64, f64)) {
    loop {
        let s: Matrix2<f64> = Matrix2::from_fn(|_, _| rng.random_range(-1.5..1.5));
        if s.determinant().abs() < 0.2 {
            continue;
        }
        let a: f64 = rng.random_range(1.0..10.0);
        let b: f64 = rng.random_range(1.0..10.0);
        if let Some(cm) = cm_from_spectrum(&s, (a, b)) {
            return (cm, (a.max(b), a.min(b)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{eigen_oracle, invariants, is_physical, symplectic_eigenvalues};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectrum_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (cm, (p, m)) = random_physical_cm(&mut rng);
            assert!(is_physical(&cm));
            let (np, nm) = symplectic_eigenvalues(&invariants(&cm).unwrap()).unwrap();
            assert!((np - p).abs() < 1e-8 * p && (nm - m).abs() < 1e-8 * p);
            let (op, om) = eigen_oracle(&cm).unwrap();
            assert!((op - p).abs() < 1e-8 * p && (om - m).abs() < 1e-8 * p);
        }
    }
}
