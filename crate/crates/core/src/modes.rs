//! Spatial modes built by averaging the field over a detector profile.
//!
//! A region's mode is described by its overlap coefficients `I_l` with the
//! box eigenfunctions. The spatial quadratures are `u_R = sum_l I_l u_l` and
//! `p_R = sum_l I_l p_l`, so `[u_R, p_R] = i` needs `sum_l I_l^2 = 1` and
//! `[u_R, p_Q] = 0` needs `sum_l I^R_l I^Q_l = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{thermal_factor, ThermalFieldConfig};
use crate::symplectic::CovarianceMatrix4;

/// Largest cross-commutator residual accepted for a verdict-bearing CM.
pub const RESIDUAL_GATE: f64 = 1e-6;

/// Truncation used when a profile is summed "without truncation".
pub const HARD_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x1: f64,
    pub x2: f64,
}

impl Region {
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        if !(x1.is_finite() && x2.is_finite()) || x1 < 0.0 || x2 <= x1 {
            return Err(Error::InvalidInput(format!(
                "region [{x1}, {x2}] must satisfy 0 <= x1 < x2"
            )));
        }
        Ok(Self { x1, x2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn centre(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }

    pub fn check_inside(&self, box_length: f64) -> Result<()> {
        // a few ulps of slack for grid-generated edges
        if self.x2 > box_length * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::InvalidInput(format!(
                "region [{}, {}] leaves the box [0, {box_length}]",
                self.x1, self.x2
            )));
        }
        Ok(())
    }

    /// Interiors intersect. Touching at a single point is not an overlap.
    pub fn overlaps(&self, other: &Region) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2
    }

    /// Gap between two disjoint regions (0 when touching or overlapping).
    pub fn separation(&self, other: &Region) -> f64 {
        (other.x1 - self.x2).max(self.x1 - other.x2).max(0.0)
    }

    /// Reflection `x -> L - x`.
    pub fn mirrored(&self, box_length: f64) -> Region {
        Region {
            x1: box_length - self.x2,
            x2: box_length - self.x1,
        }
    }

    /// Two regions of width `width`, a gap `separation` apart, centred on `L/2`.
    pub fn symmetric_pair(width: f64, separation: f64, box_length: f64) -> Result<(Region, Region)> {
        if width <= 0.0 || separation < 0.0 {
            return Err(Error::InvalidInput(format!(
                "width {width} must be positive and separation {separation} non-negative"
            )));
        }
        let mid = 0.5 * box_length;
        let r = Region::new(mid - 0.5 * separation - width, mid - 0.5 * separation)?;
        let q = Region::new(mid + 0.5 * separation, mid + 0.5 * separation + width)?;
        r.check_inside(box_length)?;
        q.check_inside(box_length)?;
        Ok((r, q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorProfile {
    /// Constant weight inside the region.
    TopHat,
    /// Top-hat cosine difference damped by `exp(-k^2 w^2)`. `width` defaults
    /// to the region width; `inverse_k` restores the top-hat `1/k` factor.
    GaussianModulated {
        width: Option<f64>,
        #[serde(default)]
        inverse_k: bool,
    },
}

impl DetectorProfile {
    pub fn gaussian() -> Self {
        DetectorProfile::GaussianModulated {
            width: None,
            inverse_k: false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetectorProfile::TopHat => "top_hat",
            DetectorProfile::GaussianModulated { .. } => "gaussian_modulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationKind {
    /// Numerical cut-off of an infinite series; convergence is checked.
    Series,
    /// The state itself only populates modes `l_min..=l_max`; sums are exact.
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub l_min: usize,
    pub l_max: usize,
    pub convergence_tol: f64,
    pub hard_cap: usize,
    pub kind: TruncationKind,
}

impl TruncationSpec {
    pub const DEFAULT_TOL: f64 = 1e-10;

    pub fn series(l_max: usize) -> Self {
        Self {
            l_min: 1,
            l_max,
            convergence_tol: Self::DEFAULT_TOL,
            hard_cap: HARD_CAP,
            kind: TruncationKind::Series,
        }
    }

    /// Series summed up to the hard cap.
    pub fn untruncated() -> Self {
        Self::series(HARD_CAP)
    }

    /// Momentum window `1..=l_max` prepared in the state.
    pub fn window(l_max: usize) -> Self {
        Self {
            kind: TruncationKind::Window,
            ..Self::series(l_max)
        }
    }

    /// Number of retained momenta, `l_max - l_min + 1`.
    pub fn delta_k(&self) -> usize {
        self.l_max + 1 - self.l_min
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_min == 0 || self.l_min > self.l_max || self.l_max > self.hard_cap {
            return Err(Error::InvalidInput(format!(
                "truncation needs 1 <= l_min ({}) <= l_max ({}) <= hard_cap ({})",
                self.l_min, self.l_max, self.hard_cap
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidInput("convergence_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    pub region: Region,
    pub profile: DetectorProfile,
    pub l_min: usize,
    pub l_max: usize,
    /// `coefficients[l - 1] = I_l`, zero outside `l_min..=l_max`.
    pub coefficients: Vec<f64>,
    /// Scale `C` mapping the raw overlap integrals onto a unit vector.
    pub normalization_constant: f64,
    /// Set once the vector has been adjusted by [`orthogonalize_pair`].
    pub orthogonalized: bool,
}

impl ModeVector {
    pub fn coefficient(&self, l: usize) -> f64 {
        if l == 0 || l > self.l_max {
            0.0
        } else {
            self.coefficients[l - 1]
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

/// Overlap of a detector profile with the box modes, normalised to a unit vector.
///
/// Top hat: `I_l ~ sqrt(2/L) (cos k x1 - cos k x2) / k`, the exact integral
/// of a constant against `phi_l`. Gaussian-modulated:
/// `I_l ~ (cos k x1 - cos k x2) exp(-k^2 w^2)`.
pub fn overlap_coefficients(
    region: &Region,
    profile: &DetectorProfile,
    trunc: &TruncationSpec,
    cfg: &ThermalFieldConfig,
) -> Result<ModeVector> {
    trunc.validate()?;
    let box_length = cfg.box_length();
    region.check_inside(box_length)?;
    let sqrt_2_over_l = (2.0 / box_length).sqrt();
    let width = match profile {
        DetectorProfile::TopHat => None,
        DetectorProfile::GaussianModulated { width, .. } => {
            let w = width.unwrap_or_else(|| region.width());
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("modulation width {w} must be positive")));
            }
            Some(w)
        }
    };

    let mut raw = vec![0.0; trunc.l_max];
    let mut max_cos_diff = 0.0f64;
    for l in trunc.l_min..=trunc.l_max {
        let k = cfg.mode(l)?.wavenumber;
        let cos_diff = (k * region.x1).cos() - (k * region.x2).cos();
        max_cos_diff = max_cos_diff.max(cos_diff.abs());
        raw[l - 1] = match (profile, width) {
            (DetectorProfile::TopHat, _) => sqrt_2_over_l * cos_diff / k,
            (DetectorProfile::GaussianModulated { inverse_k, .. }, Some(w)) => {
                let damping = (-(k * w).powi(2)).exp();
                if *inverse_k {
                    sqrt_2_over_l * cos_diff / k * damping
                } else {
                    cos_diff * damping
                }
            }
            _ => unreachable!("gaussian width resolved above"),
        };
    }
    let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if max_cos_diff < 1e-12 || norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateMode {
            x1: region.x1,
            x2: region.x2,
        });
    }
    let c = 1.0 / norm;
    Ok(ModeVector {
        region: *region,
        profile: *profile,
        l_min: trunc.l_min,
        l_max: trunc.l_max,
        coefficients: raw.into_iter().map(|v| v * c).collect(),
        normalization_constant: c,
        orthogonalized: false,
    })
}

fn check_same_support(r: &ModeVector, q: &ModeVector) -> Result<()> {
    if r.l_min != q.l_min || r.l_max != q.l_max {
        return Err(Error::InvalidPair(format!(
            "mode vectors truncated differently: [{}, {}] vs [{}, {}]",
            r.l_min, r.l_max, q.l_min, q.l_max
        )));
    }
    Ok(())
}

/// `sum_l I^R_l I^Q_l`, the coefficient of `i` in `[u_R, p_Q]`.
pub fn cross_commutator_residual(mv_r: &ModeVector, mv_q: &ModeVector) -> Result<f64> {
    check_same_support(mv_r, mv_q)?;
    Ok(mv_r
        .coefficients
        .iter()
        .zip(&mv_q.coefficients)
        .map(|(a, b)| a * b)
        .sum())
}

/// Symmetric (Löwdin) orthogonalisation of two unit vectors.
///
/// With overlap `s`, `S^{-1/2}` of the Gram matrix `[[1, s], [s, 1]]` mixes
/// the pair as `a' = p a + q b`, `b' = q a + p b`. Of all orthonormal pairs
/// this one is closest to the inputs in summed squared distance.
pub fn orthogonalize_pair(mv_r: &ModeVector, mv_q: &ModeVector) -> Result<(ModeVector, ModeVector)> {
    let s = cross_commutator_residual(mv_r, mv_q)?;
    if !(s.abs() < 1.0 - 1e-12) {
        return Err(Error::CannotOrthogonalize { overlap: s });
    }
    let plus = 1.0 / (1.0 + s).sqrt();
    let minus = 1.0 / (1.0 - s).sqrt();
    let p = 0.5 * (plus + minus);
    let q = 0.5 * (plus - minus);
    let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
        let v: Vec<f64> = x.iter().zip(y).map(|(a, b)| p * a + q * b).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / n).collect()
    };
    let mut r = mv_r.clone();
    let mut qv = mv_q.clone();
    r.coefficients = mix(&mv_r.coefficients, &mv_q.coefficients);
    qv.coefficients = mix(&mv_q.coefficients, &mv_r.coefficients);
    r.orthogonalized = true;
    qv.orthogonalized = true;
    Ok((r, qv))
}

/// Orthogonalises only when the residual exceeds `gate`.
/// Returns the pair, the original residual, and whether it was repaired.
pub fn canonical_pair(
    mv_r: ModeVector,
    mv_q: ModeVector,
    gate: f64,
) -> Result<(ModeVector, ModeVector, f64, bool)> {
    let residual = cross_commutator_residual(&mv_r, &mv_q)?;
    if residual.abs() <= gate {
        return Ok((mv_r, mv_q, residual, false));
    }
    let (r, q) = orthogonalize_pair(&mv_r, &mv_q)?;
    Ok((r, q, residual, true))
}

/// Labels for the six CM entries, in report order.
pub const ENTRY_NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmAssemblyReport {
    pub cm: CovarianceMatrix4,
    /// Per entry, in the order A, B, C, D, E, F.
    pub series_converged: [bool; 6],
    pub cross_commutator_residual: f64,
    pub tail_estimates: [f64; 6],
    pub truncation: TruncationSpec,
}

impl CmAssemblyReport {
    pub fn all_converged(&self) -> bool {
        self.series_converged.iter().all(|&c| c)
    }

    pub fn momentum_converged(&self) -> bool {
        [1, 3, 5].iter().all(|&i| self.series_converged[i])
    }

    pub fn usable_for_verdict(&self, gate: f64) -> bool {
        self.all_converged() && self.cross_commutator_residual.abs() <= gate
    }

    /// The CM, provided every series converged and the pair is canonical.
    pub fn verdict_cm(&self, gate: f64) -> Result<CovarianceMatrix4> {
        if !self.all_converged() {
            return Err(Error::Divergent(Box::new(self.clone())));
        }
        if self.cross_commutator_residual.abs() > gate {
            return Err(Error::InvalidPair(format!(
                "cross-commutator residual {:e} exceeds gate {gate:e}",
                self.cross_commutator_residual
            )));
        }
        Ok(self.cm)
    }
}

/// Cauchy-style tail estimate over the last two decades of partial sums.
/// Returns `(tail, converged)`.
fn series_tail(terms: &[f64], tol: f64) -> (f64, bool) {
    let n = terms.len();
    if n < 10 {
        return (f64::INFINITY, false);
    }
    let partial = |m: usize| terms[..m].iter().sum::<f64>();
    let s_n = partial(n);
    let s_1 = partial(n / 10);
    let s_2 = partial(n / 100);
    let d1 = (s_n - s_1).abs();
    let d2 = (s_1 - s_2).abs();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    let tail = if d1 == 0.0 {
        0.0
    } else if d2 > 0.0 && d1 < d2 {
        let r = d1 / d2;
        d1 * r / (1.0 - r)
    } else {
        d1
    };
    (tail, tail <= tol * scale)
}

/// Assembles the CM of two spatial modes. Sums run in ascending `l`.
///
/// In dimensionless quadratures the position entries carry `1/(k_l L)^2`
/// and the momentum entries `(k_l L)^2`, each times the thermal factor.
pub fn assemble_cm(
    mv_r: &ModeVector,
    mv_q: &ModeVector,
    cfg: &ThermalFieldConfig,
    trunc: &TruncationSpec,
) -> Result<CmAssemblyReport> {
    trunc.validate()?;
    check_same_support(mv_r, mv_q)?;
    if mv_r.l_min != trunc.l_min || mv_r.l_max != trunc.l_max {
        return Err(Error::InvalidPair(
            "mode vectors do not match the truncation spec".into(),
        ));
    }
    let n = trunc.l_max;
    let mut terms: [Vec<f64>; 6] = Default::default();
    for t in terms.iter_mut() {
        t.reserve(n);
    }
    for l in 1..=n {
        let (ir, iq) = (mv_r.coefficient(l), mv_q.coefficient(l));
        let (pos, mom, coth) = if ir == 0.0 && iq == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let mode = cfg.mode(l)?;
            let kl = mode.scaled_wavenumber(cfg);
            let kl2 = kl * kl;
            (1.0 / kl2, kl2, thermal_factor(&mode, cfg)?)
        };
        terms[0].push(pos * ir * ir * coth);
        terms[1].push(mom * ir * ir * coth);
        terms[2].push(pos * iq * iq * coth);
        terms[3].push(mom * iq * iq * coth);
        terms[4].push(pos * ir * iq * coth);
        terms[5].push(mom * ir * iq * coth);
    }
    let sums: Vec<f64> = terms.iter().map(|t| t.iter().sum()).collect();
    let mut converged = [true; 6];
    let mut tails = [0.0; 6];
    if trunc.kind == TruncationKind::Series {
        for i in 0..6 {
            let (tail, ok) = series_tail(&terms[i], trunc.convergence_tol);
            tails[i] = tail;
            converged[i] = ok;
        }
    }
    Ok(CmAssemblyReport {
        cm: CovarianceMatrix4::new_unchecked(sums[0], sums[1], sums[2], sums[3], sums[4], sums[5]),
        series_converged: converged,
        cross_commutator_residual: cross_commutator_residual(mv_r, mv_q)?,
        tail_estimates: tails,
        truncation: *trunc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{is_physical, symplectic_eigenvalues, invariants};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cfg() -> ThermalFieldConfig {
        ThermalFieldConfig::default()
    }

    #[test]
    fn single_mode_top_hat_is_unit() {
        let r = Region::new(0.0, 1.0).unwrap();
        let mv = overlap_coefficients(&r, &DetectorProfile::TopHat, &TruncationSpec::window(1), &cfg()).unwrap();
        assert_relative_eq!(mv.coefficient(1), 1.0, epsilon = 1e-15);
        // raw integral of sqrt(2) sin(pi x) over [0, 1]
        assert_relative_eq!(1.0 / mv.normalization_constant, 2.0 * 2f64.sqrt() / PI, max_relative = 1e-14);
    }

    #[test]
    fn mirror_regions_have_matching_magnitudes() {
        let r = Region::new(0.0, 0.5).unwrap();
        let q = r.mirrored(1.0);
        let t = TruncationSpec::window(40);
        let a = overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        for l in 1..=40 {
            let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
            assert_relative_eq!(b.coefficient(l), sign * a.coefficient(l), epsilon = 1e-14);
        }
    }

    #[test]
    fn coefficients_outside_window_vanish() {
        let r = Region::new(0.2, 0.4).unwrap();
        let t = TruncationSpec {
            l_min: 3,
            ..TruncationSpec::window(9)
        };
        let mv = overlap_coefficients(&r, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        assert_eq!(mv.coefficients.len(), 9);
        assert!(mv.coefficients[..2].iter().all(|&c| c == 0.0));
        assert!((mv.norm_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_region_rejected() {
        // whole box against l = 2 only: cos(0) - cos(2 pi) = 0
        let r = Region::new(0.0, 1.0).unwrap();
        let t = TruncationSpec {
            l_min: 2,
            ..TruncationSpec::window(2)
        };
        assert!(matches!(
            overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()),
            Err(Error::DegenerateMode { .. })
        ));
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(0.5, 0.5).is_err());
        assert!(Region::new(-0.1, 0.5).is_err());
        let r = Region::new(0.6, 1.2).unwrap();
        assert!(overlap_coefficients(&r, &DetectorProfile::TopHat, &TruncationSpec::window(3), &cfg()).is_err());
        let a = Region::new(0.1, 0.3).unwrap();
        let b = Region::new(0.3, 0.5).unwrap();
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&Region::new(0.2, 0.4).unwrap()));
        assert_eq!(a.separation(&Region::new(0.4, 0.5).unwrap()), 0.4 - 0.3);
        let (r, q) = Region::symmetric_pair(0.1, 0.2, 1.0).unwrap();
        assert_relative_eq!(r.x1, 0.3);
        assert_relative_eq!(q.x2, 0.7);
        assert!(Region::symmetric_pair(0.4, 0.4, 1.0).is_err());
    }

    #[test]
    fn residual_of_identical_regions_is_one() {
        let r = Region::new(0.2, 0.4).unwrap();
        let t = TruncationSpec::window(30);
        let a = overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        assert_relative_eq!(cross_commutator_residual(&a, &a).unwrap(), 1.0, epsilon = 1e-14);
        let b = overlap_coefficients(&r, &DetectorProfile::TopHat, &TruncationSpec::window(31), &cfg()).unwrap();
        assert!(matches!(cross_commutator_residual(&a, &b), Err(Error::InvalidPair(_))));
        assert!(matches!(orthogonalize_pair(&a, &a), Err(Error::CannotOrthogonalize { .. })));
    }

    #[test]
    fn disjoint_top_hats_nearly_commute() {
        let t = TruncationSpec::series(2000);
        let r = Region::new(0.2, 0.4).unwrap();
        let q = Region::new(0.55, 0.75).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        assert!(cross_commutator_residual(&a, &b).unwrap().abs() < 0.01);
    }

    fn unit_pair_with_overlap(s: f64, dim: usize) -> (ModeVector, ModeVector) {
        let base = ModeVector {
            region: Region::new(0.0, 1.0).unwrap(),
            profile: DetectorProfile::TopHat,
            l_min: 1,
            l_max: dim,
            coefficients: vec![0.0; dim],
            normalization_constant: 1.0,
            orthogonalized: false,
        };
        let mut a = base.clone();
        let mut b = base;
        a.coefficients[0] = 1.0;
        b.coefficients[0] = s;
        b.coefficients[1] = (1.0 - s * s).sqrt();
        (a, b)
    }

    #[test]
    fn lowdin_fixed_point_and_displacement() {
        let (a, b) = unit_pair_with_overlap(0.0, 3);
        let (a2, b2) = orthogonalize_pair(&a, &b).unwrap();
        for i in 0..3 {
            assert!((a2.coefficients[i] - a.coefficients[i]).abs() < 1e-12);
            assert!((b2.coefficients[i] - b.coefficients[i]).abs() < 1e-12);
        }

        let (a, b) = unit_pair_with_overlap(0.1, 3);
        let (a2, b2) = orthogonalize_pair(&a, &b).unwrap();
        assert!(cross_commutator_residual(&a2, &b2).unwrap().abs() < 1e-12);
        assert!((a2.norm_sq() - 1.0).abs() < 1e-12);
        assert!((b2.norm_sq() - 1.0).abs() < 1e-12);
        let dist = |x: &ModeVector, y: &ModeVector| {
            x.coefficients
                .iter()
                .zip(&y.coefficients)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        // 2-vector closed form: |a' - a|^2 = (p-1)^2 + q^2 + 2 (p-1) q s
        let (plus, minus) = (1.0 / 1.1f64.sqrt(), 1.0 / 0.9f64.sqrt());
        let (p, q) = (0.5 * (plus + minus), 0.5 * (plus - minus));
        let expected = ((p - 1.0).powi(2) + q * q + 0.2 * (p - 1.0) * q).sqrt();
        assert_relative_eq!(dist(&a, &a2), expected, max_relative = 1e-10);
        assert!(dist(&a, &a2) <= 0.06 && dist(&b, &b2) <= 0.06);
    }

    #[test]
    fn orthogonalisation_restores_commutators_before_assembly() {
        let t = TruncationSpec::window(12);
        let (r, q) = Region::symmetric_pair(0.125, 0.0, 1.0).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let before = assemble_cm(&a, &b, &cfg(), &t).unwrap();
        assert!(before.cross_commutator_residual.abs() > RESIDUAL_GATE);
        assert!(before.verdict_cm(RESIDUAL_GATE).is_err());
        let (a2, b2, raw, repaired) = canonical_pair(a, b, RESIDUAL_GATE).unwrap();
        assert!(repaired);
        assert_eq!(raw, before.cross_commutator_residual);
        let after = assemble_cm(&a2, &b2, &cfg(), &t).unwrap();
        assert!(after.cross_commutator_residual.abs() < 1e-12);
        assert!(after.verdict_cm(RESIDUAL_GATE).is_ok());
        assert!(is_physical(&after.cm));
    }

    #[test]
    fn single_mode_ground_state_smoke() {
        let t = TruncationSpec::window(1);
        let r = Region::new(0.0, 1.0).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let rep = assemble_cm(&a, &a, &cfg(), &t).unwrap();
        let pi2 = PI * PI;
        assert_relative_eq!(rep.cm.a_uu, 1.0 / pi2, max_relative = 1e-14);
        assert_relative_eq!(rep.cm.a_pp, pi2, max_relative = 1e-14);
        assert_relative_eq!(rep.cm.c_uu, rep.cm.a_uu, max_relative = 1e-14);
        assert_relative_eq!(rep.cm.c_pp, rep.cm.a_pp, max_relative = 1e-14);
        assert!(rep.all_converged());
    }

    #[test]
    fn untruncated_top_hat_momentum_entries_diverge() {
        let t = TruncationSpec::untruncated();
        let (r, q) = Region::symmetric_pair(0.1, 0.1, 1.0).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::TopHat, &t, &cfg()).unwrap();
        let rep = assemble_cm(&a, &b, &cfg(), &t).unwrap();
        assert!(!rep.series_converged[1] && !rep.series_converged[3]);
        assert!(rep.series_converged[0] && rep.series_converged[2] && rep.series_converged[4]);
        assert!(!rep.momentum_converged());
        assert!(matches!(rep.verdict_cm(1.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn gaussian_series_converge_quickly() {
        let t = TruncationSpec::series(200);
        let (r, q) = Region::symmetric_pair(0.1, 0.1, 1.0).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        for temp in [0.0, 1.0, 1000.0] {
            let c = cfg().with_temperature(temp).unwrap();
            let rep = assemble_cm(&a, &b, &c, &t).unwrap();
            assert!(rep.all_converged());
            assert!(rep.tail_estimates.iter().all(|&x| x < 1e-10));
        }
    }

    #[test]
    fn mirror_symmetry_of_entries() {
        let t = TruncationSpec::series(400);
        let (r, q) = Region::symmetric_pair(0.1, 0.15, 1.0).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        let (a, b) = orthogonalize_pair(&a, &b).unwrap();
        let rep = assemble_cm(&a, &b, &cfg().with_temperature(3.0).unwrap(), &t).unwrap();
        assert_relative_eq!(rep.cm.a_uu, rep.cm.b_uu, max_relative = 1e-12);
        assert_relative_eq!(rep.cm.a_pp, rep.cm.b_pp, max_relative = 1e-12);
    }

    #[test]
    fn entries_grow_with_temperature() {
        let t = TruncationSpec::series(400);
        let (r, q) = Region::symmetric_pair(0.1, 0.05, 1.0).unwrap();
        let a = overlap_coefficients(&r, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        let b = overlap_coefficients(&q, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
        let mut prev = [0.0f64; 6];
        for temp in [0.0, 0.5, 5.0, 50.0, 500.0] {
            let rep = assemble_cm(&a, &b, &cfg().with_temperature(temp).unwrap(), &t).unwrap();
            let e = rep.cm.entries();
            for i in 0..6 {
                assert!(e[i].abs() >= prev[i].abs());
            }
            prev = e;
        }
    }

    #[test]
    fn zero_temperature_canonical_cm_is_physical() {
        let t = TruncationSpec::series(1000);
        for (w, sep) in [(0.1, 0.0), (0.05, 0.1), (0.2, 0.3)] {
            let (r, q) = Region::symmetric_pair(w, sep, 1.0).unwrap();
            let a = overlap_coefficients(&r, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
            let b = overlap_coefficients(&q, &DetectorProfile::gaussian(), &t, &cfg()).unwrap();
            let (a, b, _, _) = canonical_pair(a, b, RESIDUAL_GATE).unwrap();
            let rep = assemble_cm(&a, &b, &cfg(), &t).unwrap();
            let (_, nu) = symplectic_eigenvalues(&invariants(&rep.cm).unwrap()).unwrap();
            assert!(nu >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn mode_vector_json_roundtrip() {
        let r = Region::new(0.1, 0.3).unwrap();
        let mv = overlap_coefficients(&r, &DetectorProfile::gaussian(), &TruncationSpec::series(50), &cfg()).unwrap();
        let s = serde_json::to_string(&mv).unwrap();
        let back: ModeVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mv);
    }
}
