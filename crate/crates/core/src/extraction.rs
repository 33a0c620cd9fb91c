//! Swapping field entanglement onto a pair of probe qubits.
//!
//! Two harmonic probes, one per region, interact weakly with the field for a
//! short time. To lowest order in the effective coupling `Gamma`, and keeping
//! only the ground and first excited probe levels, the reduced probe state in
//! the basis `|00>, |01>, |10>, |11>` is
//!
//! ```text
//! [[1, 0, 0, 0],
//!  [0, x, y, 0],
//!  [0, y, z, 0],
//!  [0, 0, 0, delta]]   (up to normalisation)
//! ```
//!
//! with `x, y, z = kappa (A/2, E/2, C/2)`, `kappa = Gamma^2 hbar m omega_p / 2`
//! and `delta = kappa^2 <u_R^2 u_Q^2>`. The Gaussian fourth moment follows
//! from Wick's theorem.

use nalgebra::{Cholesky, Matrix2, Matrix4, SymmetricEigen, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::SweepResult;
use crate::error::{Error, Result};
use crate::field::ThermalFieldConfig;
use crate::symplectic::{is_physical, CovarianceMatrix4, Verdict};

/// Upper bound on `Gamma` for the perturbative expansion to be trusted.
pub const MAX_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeCoupling {
    pub gamma_eff: f64,
    /// Probe oscillator frequency `omega_p`.
    pub probe_frequency: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl ProbeCoupling {
    pub fn new(gamma_eff: f64, probe_frequency: f64, cfg: &ThermalFieldConfig) -> Result<Self> {
        if !(gamma_eff > 0.0 && gamma_eff < MAX_GAMMA) {
            return Err(Error::Domain(format!(
                "effective coupling {gamma_eff} outside the perturbative range (0, {MAX_GAMMA})"
            )));
        }
        if !(probe_frequency > 0.0 && probe_frequency.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "probe frequency {probe_frequency} must be positive"
            )));
        }
        Ok(Self {
            gamma_eff,
            probe_frequency,
            hbar: cfg.hbar(),
            mass: cfg.mass(),
        })
    }

    /// Probe whose ground state has position spread `sigma`:
    /// `omega_p = hbar / (2 m sigma^2)`.
    pub fn from_probe_width(gamma_eff: f64, sigma: f64, cfg: &ThermalFieldConfig) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("probe width {sigma} must be positive")));
        }
        Self::new(gamma_eff, cfg.hbar() / (2.0 * cfg.mass() * sigma * sigma), cfg)
    }

    /// `Gamma^2 hbar m omega_p / 2`
    pub fn kappa(&self) -> f64 {
        self.gamma_eff.powi(2) * self.hbar * self.mass * self.probe_frequency / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePairState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub delta: f64,
    pub entangled: bool,
    /// `|y| - sqrt(delta (delta + 1)) / 2`; positive when entangled.
    pub condition_margin: f64,
}

/// `<u_R^2 u_Q^2>` of a zero-mean Gaussian state with `<u_R^2> = A/2`,
/// `<u_Q^2> = C/2`, `<u_R u_Q> = E/2`.
pub fn wick_fourth_moment(cm: &CovarianceMatrix4) -> f64 {
    let [a, _, c, _, e, _] = cm.entries();
    (a / 2.0) * (c / 2.0) + 2.0 * (e / 2.0).powi(2)
}

pub fn extraction_threshold(delta: f64) -> f64 {
    0.5 * (delta * (delta + 1.0)).sqrt()
}

/// Probe state after the interaction; the CM must be physical.
pub fn probe_state(cm: &CovarianceMatrix4, coupling: &ProbeCoupling) -> Result<ProbePairState> {
    cm.check_finite()?;
    if !is_physical(cm) {
        return Err(Error::UnphysicalState {
            det_gamma: crate::symplectic::invariants(cm)
                .map(|i| i.det_gamma)
                .unwrap_or(f64::NAN),
        });
    }
    let kappa = coupling.kappa();
    let delta = kappa * kappa * wick_fourth_moment(cm);
    let [a, _, c, _, e, _] = cm.entries();
    let (x, y, z) = (kappa * a / 2.0, kappa * e / 2.0, kappa * c / 2.0);
    let threshold = extraction_threshold(delta);
    Ok(ProbePairState {
        x,
        y,
        z,
        delta,
        entangled: y.abs() > threshold,
        condition_margin: y.abs() - threshold,
    })
}

/// `|y| > sqrt(delta (delta + 1)) / 2`. The sign of `y` is a local phase.
pub fn extraction_test(state: &ProbePairState) -> bool {
    state.y.abs() > extraction_threshold(state.delta)
}

/// Unnormalised probe density matrix in the basis `|00>, |01>, |10>, |11>`.
pub fn probe_density_matrix(state: &ProbePairState) -> Matrix4<f64> {
    let mut rho = Matrix4::zeros();
    rho[(0, 0)] = 1.0;
    rho[(1, 1)] = state.x;
    rho[(1, 2)] = state.y;
    rho[(2, 1)] = state.y;
    rho[(2, 2)] = state.z;
    rho[(3, 3)] = state.delta;
    rho
}

/// Transpose on the second qubit: `<i j| rho |k l>  ->  <i l| rho |k j>`.
pub fn partial_transpose_second(rho: &Matrix4<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| {
        let (i, j) = (r / 2, r % 2);
        let (k, l) = (c / 2, c % 2);
        rho[(2 * i + l, 2 * k + j)]
    })
}

/// Smallest eigenvalue of the partially transposed probe state. Negative
/// means entangled (Peres-Horodecki is exact for two qubits).
pub fn ppt_probe_oracle(state: &ProbePairState) -> f64 {
    let pt = partial_transpose_second(&probe_density_matrix(state));
    SymmetricEigen::new(pt).eigenvalues.min()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sample estimate of `<u_R^2 u_Q^2>` drawing `(u_R, u_Q)` from the position block.
pub fn monte_carlo_fourth_moment<R: Rng + ?Sized>(
    cm: &CovarianceMatrix4,
    samples: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let [a, _, c, _, e, _] = cm.entries();
    let cov = Matrix2::new(a / 2.0, e / 2.0, e / 2.0, c / 2.0);
    let chol = Cholesky::new(cov)
        .ok_or_else(|| Error::Numerical("position block is not positive definite".into()))?;
    let l = chol.l();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let g = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let u = l * g;
        let v = u[0] * u[0] * u[1] * u[1];
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRow {
    pub separation: f64,
    pub temperature: f64,
    pub field_verdict: Verdict,
    pub log_negativity: f64,
    pub state: ProbePairState,
    pub threshold: f64,
    pub oracle_min_eigenvalue: f64,
}

/// Probe states for every physical point of a sweep.
///
/// `probe_width` defaults to the region width of the sweep.
pub fn extraction_scan(
    sweep: &SweepResult,
    gamma_eff: f64,
    probe_width: Option<f64>,
    cfg: &ThermalFieldConfig,
) -> Result<Vec<ExtractionRow>> {
    let coupling = ProbeCoupling::from_probe_width(gamma_eff, probe_width.unwrap_or(sweep.spec.width), cfg)?;
    let mut rows = Vec::new();
    for p in &sweep.points {
        let Some(e) = p.evaluation() else { continue };
        if !e.verdict.is_valid() {
            continue;
        }
        let state = probe_state(&e.report.cm, &coupling)?;
        rows.push(ExtractionRow {
            separation: p.separation,
            temperature: p.temperature,
            field_verdict: e.verdict.verdict,
            log_negativity: e.log_negativity(),
            threshold: extraction_threshold(state.delta),
            oracle_min_eigenvalue: ppt_probe_oracle(&state),
            state,
        });
    }
    Ok(rows)
}
