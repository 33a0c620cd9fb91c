//! Two-mode Gaussian state algebra.
//!
//! Covariance matrices here have the block layout produced by the spatial
//! mode construction, ordered as `(u_R, p_R, u_Q, p_Q)`:
//!
//! ```text
//!     | A 0 E 0 |
//!     | 0 B 0 F |
//!     | E 0 C 0 |
//!     | 0 F 0 D |
//! ```
//!
//! Vacuum variance is 1, so physicality reads `nu_minus >= 1`.

use nalgebra::{Matrix4, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance applied to every `nu_minus` comparison. Boundary states are
/// reported separable.
pub const NU_TOL: f64 = 1e-9;

/// Negative discriminants down to this (relative) size are clamped to zero.
pub const DISCRIMINANT_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix4 {
    /// A: position variance of mode R.
    pub a_uu: f64,
    /// B: momentum variance of mode R.
    pub a_pp: f64,
    /// C: position variance of mode Q.
    pub b_uu: f64,
    /// D: momentum variance of mode Q.
    pub b_pp: f64,
    /// E: position cross correlation.
    pub c_uu: f64,
    /// F: momentum cross correlation.
    pub c_pp: f64,
}

impl CovarianceMatrix4 {
    /// Builds a CM, rejecting non-finite entries and non-positive variances.
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self> {
        let cm = Self::new_unchecked(a, b, c, d, e, f);
        cm.check_finite()?;
        if !(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0) {
            return Err(Error::InvalidInput(format!(
                "diagonal entries must be positive, got ({a}, {b}, {c}, {d})"
            )));
        }
        Ok(cm)
    }

    pub const fn new_unchecked(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        Self {
            a_uu: a,
            a_pp: b,
            b_uu: c,
            b_pp: d,
            c_uu: e,
            c_pp: f,
        }
    }

    pub const fn identity() -> Self {
        Self::new_unchecked(1.0, 1.0, 1.0, 1.0, 0.0, 0.0)
    }

    /// Two uncorrelated modes, each with variance `n` in both quadratures.
    pub const fn product_thermal(n: f64) -> Self {
        Self::new_unchecked(n, n, n, n, 0.0, 0.0)
    }

    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        Self::new_unchecked(c, c, c, c, s, -s)
    }

    /// Entries in the order A, B, C, D, E, F.
    pub fn entries(&self) -> [f64; 6] {
        [self.a_uu, self.a_pp, self.b_uu, self.b_pp, self.c_uu, self.c_pp]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.entries().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "non-finite covariance entry in {:?}",
                self.entries()
            )))
        }
    }

    /// Full 4x4 matrix in `(u_R, p_R, u_Q, p_Q)` ordering.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let [a, b, c, d, e, f] = self.entries();
        Matrix4::new(
            a, 0.0, e, 0.0, //
            0.0, b, 0.0, f, //
            e, 0.0, c, 0.0, //
            0.0, f, 0.0, d,
        )
    }

    /// Positive definiteness of the real matrix (both 2x2 quadrature blocks).
    pub fn is_positive_definite(&self) -> bool {
        let [a, b, c, d, e, f] = self.entries();
        a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0 && a * c - e * e > 0.0 && b * d - f * f > 0.0
    }
}

/// The four local-symplectic invariants of a two-mode CM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticInvariants {
    pub det_a: f64,
    pub det_b: f64,
    pub det_c: f64,
    pub det_gamma: f64,
}

impl SymplecticInvariants {
    /// `det A + det B + 2 det C`.
    pub fn delta(&self) -> f64 {
        self.det_a + self.det_b + 2.0 * self.det_c
    }
}

pub fn invariants(cm: &CovarianceMatrix4) -> Result<SymplecticInvariants> {
    cm.check_finite()?;
    let [a, b, c, d, e, f] = cm.entries();
    Ok(SymplecticInvariants {
        det_a: a * b,
        det_b: c * d,
        det_c: e * f,
        det_gamma: (a * c - e * e) * (b * d - f * f),
    })
}

/// Closed-form symplectic eigenvalues `(nu_plus, nu_minus)` from the invariants.
pub fn symplectic_eigenvalues(inv: &SymplecticInvariants) -> Result<(f64, f64)> {
    let delta = inv.delta();
    let mut disc = delta * delta - 4.0 * inv.det_gamma;
    if !disc.is_finite() {
        return Err(Error::InvalidInput("non-finite invariants".into()));
    }
    if disc < 0.0 {
        if disc >= -DISCRIMINANT_CLAMP * (delta * delta).max(1.0) {
            disc = 0.0;
        } else {
            return Err(Error::MalformedCovariance { discriminant: disc });
        }
    }
    let root = disc.sqrt();
    let plus_sq = 0.5 * (delta + root);
    // delta - root loses precision for nearly pure states; use the product
    // nu_plus^2 nu_minus^2 = det(gamma) instead.
    let minus_sq = if plus_sq > 0.0 {
        inv.det_gamma / plus_sq
    } else {
        0.0
    };
    Ok((plus_sq.max(0.0).sqrt(), minus_sq.max(0.0).sqrt()))
}

/// Independent route: moduli of the eigenvalues of `i Omega gamma`, computed
/// from a real Schur decomposition of the assembled 4x4 matrix.
pub fn eigen_oracle(cm: &CovarianceMatrix4) -> Result<(f64, f64)> {
    cm.check_finite()?;
    let omega = Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    );
    let m = omega * cm.to_matrix();
    let schur = Schur::try_new(m, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut moduli: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok((
        0.5 * (moduli[0] + moduli[1]),
        0.5 * (moduli[2] + moduli[3]),
    ))
}

fn nu_minus(cm: &CovarianceMatrix4) -> Result<f64> {
    Ok(symplectic_eigenvalues(&invariants(cm)?)?.1)
}

/// `gamma + i Omega >= 0`, i.e. a positive definite CM with `nu_minus >= 1 - tol`.
pub fn is_physical(cm: &CovarianceMatrix4) -> bool {
    if !cm.is_positive_definite() {
        return false;
    }
    match nu_minus(cm) {
        Ok(nu) => nu >= 1.0 - NU_TOL,
        Err(_) => false,
    }
}

/// Momentum sign flip of mode Q (`F -> -F`).
pub fn partial_transpose(cm: &CovarianceMatrix4) -> CovarianceMatrix4 {
    CovarianceMatrix4 {
        c_pp: -cm.c_pp,
        ..*cm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PhysicalityViolated,
    Separable,
    Entangled,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::PhysicalityViolated => "physicality_violated",
            Verdict::Separable => "separable",
            Verdict::Entangled => "entangled",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of the PPT test. When the verdict is
/// [`Verdict::PhysicalityViolated`], `nu_minus_pt` and both separability
/// expressions are NaN and `log_negativity` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityVerdict {
    pub verdict: Verdict,
    pub nu_minus: f64,
    pub nu_minus_pt: f64,
    /// The separability expression with the factor arrangement
    /// `1 + (AC - F^2)(BD - E^2) - AB - CD + 2EF`.
    pub sep_expr_direct: f64,
    /// Same expression built from the determinant of the transposed CM,
    /// `1 + (AC - E^2)(BD - F^2) - AB - CD + 2EF`. Negative iff entangled.
    pub sep_expr_det: f64,
    pub log_negativity: f64,
}

impl SeparabilityVerdict {
    pub fn is_valid(&self) -> bool {
        self.verdict != Verdict::PhysicalityViolated
    }

    /// Whether the direct-form expression disagrees in sign with the verdict.
    pub fn direct_sign_mismatch(&self) -> bool {
        self.is_valid() && ((self.sep_expr_direct < 0.0) != (self.verdict == Verdict::Entangled))
    }
}

pub fn separability_test(cm: &CovarianceMatrix4) -> Result<SeparabilityVerdict> {
    let inv = invariants(cm)?;
    let (_, nu_minus) = symplectic_eigenvalues(&inv)?;
    if !cm.is_positive_definite() || nu_minus < 1.0 - NU_TOL {
        return Ok(SeparabilityVerdict {
            verdict: Verdict::PhysicalityViolated,
            nu_minus,
            nu_minus_pt: f64::NAN,
            sep_expr_direct: f64::NAN,
            sep_expr_det: f64::NAN,
            log_negativity: 0.0,
        });
    }
    let pt = partial_transpose(cm);
    let nu_minus_pt = symplectic_eigenvalues(&invariants(&pt)?)?.1;
    let [a, b, c, d, e, f] = cm.entries();
    let local = 1.0 - a * b - c * d + 2.0 * e * f;
    let sep_expr_direct = local + (a * c - f * f) * (b * d - e * e);
    let sep_expr_det = local + inv.det_gamma;
    let entangled = nu_minus_pt < 1.0 - NU_TOL;
    Ok(SeparabilityVerdict {
        verdict: if entangled {
            Verdict::Entangled
        } else {
            Verdict::Separable
        },
        nu_minus,
        nu_minus_pt,
        sep_expr_direct,
        sep_expr_det,
        log_negativity: if entangled { -nu_minus_pt.log2() } else { 0.0 },
    })
}

/// `Tr rho^2 = 1 / sqrt(det gamma)`.
pub fn purity(cm: &CovarianceMatrix4) -> Result<f64> {
    let det = invariants(cm)?.det_gamma;
    if det < 1.0 - NU_TOL {
        return Err(Error::UnphysicalState { det_gamma: det });
    }
    Ok(1.0 / det.sqrt())
}

/// Purity above which the state is entangled: `1 / sqrt(AB + CD - 2EF - 1)`.
/// Returns `+inf` when the radicand is not positive.
pub fn purity_threshold(cm: &CovarianceMatrix4) -> f64 {
    let [a, b, c, d, e, f] = cm.entries();
    let radicand = a * b + c * d - 2.0 * e * f - 1.0;
    if radicand > 0.0 {
        1.0 / radicand.sqrt()
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tms1() -> CovarianceMatrix4 {
        CovarianceMatrix4::two_mode_squeezed(1.0)
    }

    #[test]
    fn invariants_of_reference_states() {
        let id = invariants(&CovarianceMatrix4::identity()).unwrap();
        assert_eq!((id.det_a, id.det_b, id.det_c, id.det_gamma), (1.0, 1.0, 0.0, 1.0));

        let th = invariants(&CovarianceMatrix4::product_thermal(2.0)).unwrap();
        assert_eq!((th.det_a, th.det_b, th.det_c, th.det_gamma), (4.0, 4.0, 0.0, 16.0));

        let sq = invariants(&tms1()).unwrap();
        let (c2, s2) = (2f64.cosh().powi(2), 2f64.sinh().powi(2));
        assert_relative_eq!(sq.det_a, c2, max_relative = 1e-14);
        assert_relative_eq!(sq.det_b, c2, max_relative = 1e-14);
        assert_relative_eq!(sq.det_c, -s2, max_relative = 1e-14);
        assert_relative_eq!(sq.det_gamma, 1.0, epsilon = 1e-11);
        assert_relative_eq!(
            tms1().to_matrix().determinant(),
            sq.det_gamma,
            epsilon = 1e-11
        );
    }

    #[test]
    fn non_finite_rejected() {
        let cm = CovarianceMatrix4::new_unchecked(f64::NAN, 1.0, 1.0, 1.0, 0.0, 0.0);
        assert!(matches!(invariants(&cm), Err(Error::InvalidInput(_))));
        assert!(CovarianceMatrix4::new(1.0, 1.0, -1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn eigenvalues_reference_cases() {
        let ev = |cm: CovarianceMatrix4| symplectic_eigenvalues(&invariants(&cm).unwrap()).unwrap();
        assert_eq!(ev(CovarianceMatrix4::identity()), (1.0, 1.0));
        let (p, m) = ev(CovarianceMatrix4::product_thermal(3.5));
        assert_relative_eq!(p, 3.5, max_relative = 1e-15);
        assert_relative_eq!(m, 3.5, max_relative = 1e-15);
        let (p, m) = ev(tms1());
        assert_relative_eq!(p, 1.0, epsilon = 1e-9);
        assert_relative_eq!(m, 1.0, epsilon = 1e-9);
        let (op, om) = eigen_oracle(&tms1()).unwrap();
        assert_relative_eq!(op, 1.0, epsilon = 1e-9);
        assert_relative_eq!(om, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn malformed_discriminant_errors() {
        let inv = SymplecticInvariants {
            det_a: 1.0,
            det_b: 1.0,
            det_c: 0.0,
            det_gamma: 5.0,
        };
        assert!(matches!(
            symplectic_eigenvalues(&inv),
            Err(Error::MalformedCovariance { .. })
        ));
        // within the clamp band
        let inv = SymplecticInvariants {
            det_gamma: 1.0 + 1e-12,
            ..inv
        };
        let (p, m) = symplectic_eigenvalues(&inv).unwrap();
        assert_relative_eq!(p, 1.0, epsilon = 1e-6);
        assert_relative_eq!(m, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn oracle_block_diagonal() {
        assert_eq!(eigen_oracle(&CovarianceMatrix4::identity()).unwrap(), (1.0, 1.0));
        let cm = CovarianceMatrix4::new(2.0, 2.0, 3.0, 3.0, 0.0, 0.0).unwrap();
        let (p, m) = eigen_oracle(&cm).unwrap();
        assert_relative_eq!(p, 3.0, max_relative = 1e-14);
        assert_relative_eq!(m, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn physicality() {
        assert!(is_physical(&CovarianceMatrix4::identity()));
        assert!(!is_physical(&CovarianceMatrix4::product_thermal(0.5)));
        assert!(is_physical(&tms1()));
        // indefinite matrix whose invariants still give nu_minus = 1
        let bad = CovarianceMatrix4::new_unchecked(1.0, 1.0, 1.0, 1.0, 2.0, 2.0);
        assert!(!is_physical(&bad));
    }

    #[test]
    fn partial_transpose_cases() {
        let cm = CovarianceMatrix4::new_unchecked(2.0, 2.0, 2.0, 2.0, 0.3, 0.2);
        let pt = partial_transpose(&cm);
        assert_eq!((pt.c_uu, pt.c_pp), (0.3, -0.2));
        assert_eq!(partial_transpose(&pt), cm);
        let diag = CovarianceMatrix4::product_thermal(2.0);
        assert_eq!(partial_transpose(&diag), diag);

        let (_, m) = eigen_oracle(&partial_transpose(&tms1())).unwrap();
        assert_relative_eq!(m, (-2.0f64).exp(), max_relative = 1e-9);
        assert_relative_eq!(m, 0.1353, epsilon = 1e-4);
    }

    #[test]
    fn separability_reference_cases() {
        let v = separability_test(&CovarianceMatrix4::identity()).unwrap();
        assert_eq!(v.verdict, Verdict::Separable);
        assert_eq!(v.log_negativity, 0.0);

        let v = separability_test(&tms1()).unwrap();
        assert_eq!(v.verdict, Verdict::Entangled);
        assert_relative_eq!(v.log_negativity, 2.0 / std::f64::consts::LN_2, max_relative = 1e-9);
        assert!(v.sep_expr_det < 0.0);

        let v = separability_test(&CovarianceMatrix4::product_thermal(5.0)).unwrap();
        assert_eq!(v.verdict, Verdict::Separable);

        let v = separability_test(&CovarianceMatrix4::product_thermal(0.5)).unwrap();
        assert_eq!(v.verdict, Verdict::PhysicalityViolated);
        assert!(v.nu_minus_pt.is_nan());
        assert!(!v.is_valid());
    }

    #[test]
    fn purity_cases() {
        assert_eq!(purity(&CovarianceMatrix4::identity()).unwrap(), 1.0);
        assert_eq!(purity(&CovarianceMatrix4::product_thermal(2.0)).unwrap(), 0.25);
        for r in [0.1, 0.7, 1.3] {
            let p = purity(&CovarianceMatrix4::two_mode_squeezed(r)).unwrap();
            assert_relative_eq!(p, 1.0, epsilon = 1e-9);
        }
        assert!(matches!(
            purity(&CovarianceMatrix4::product_thermal(0.5)),
            Err(Error::UnphysicalState { .. })
        ));
    }

    #[test]
    fn purity_threshold_cases() {
        assert_eq!(purity_threshold(&CovarianceMatrix4::identity()), 1.0);

        let (c, s) = (2f64.cosh(), 2f64.sinh());
        let expected = 1.0 / (2.0 * c * c + 2.0 * s * s - 1.0).sqrt();
        let t = purity_threshold(&tms1());
        assert_relative_eq!(t, expected, max_relative = 1e-12);
        assert!(t > 0.136 && t < 0.137);

        let t = purity_threshold(&CovarianceMatrix4::product_thermal(2.0));
        assert_relative_eq!(t, 1.0 / 7f64.sqrt(), max_relative = 1e-15);
        assert!(t > 0.25);

        let degenerate = CovarianceMatrix4::new_unchecked(0.5, 0.5, 0.5, 0.5, 0.0, 0.0);
        assert_eq!(purity_threshold(&degenerate), f64::INFINITY);
    }
}
