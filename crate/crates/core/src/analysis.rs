//! Entanglement maps, momentum-window scans and critical temperatures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ThermalFieldConfig;
use crate::modes::{
    assemble_cm, canonical_pair, overlap_coefficients, CmAssemblyReport, DetectorProfile, Region,
    TruncationSpec, RESIDUAL_GATE,
};
use crate::symplectic::{
    invariants, is_physical, purity, purity_threshold, separability_test, symplectic_eigenvalues,
    SeparabilityVerdict, Verdict, NU_TOL,
};

/// Which covariance matrix the uncertainty check `nu_minus >= 1` is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicalityGate {
    /// The orthogonalised pair that also carries the verdict. Always passes
    /// for a physical field state.
    Canonical,
    /// The modes exactly as built from the detector profile, before any
    /// commutator repair. A truncated momentum window that is too narrow for
    /// the region size fails here.
    AsConstructed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSetup {
    pub region_r: Region,
    pub region_q: Region,
    pub profile: DetectorProfile,
    pub truncation: TruncationSpec,
    pub gate: PhysicalityGate,
    pub residual_gate: f64,
}

impl PairSetup {
    pub fn new(region_r: Region, region_q: Region, profile: DetectorProfile, truncation: TruncationSpec) -> Self {
        Self {
            region_r,
            region_q,
            profile,
            truncation,
            gate: PhysicalityGate::Canonical,
            residual_gate: RESIDUAL_GATE,
        }
    }

    pub fn with_gate(self, gate: PhysicalityGate) -> Self {
        Self { gate, ..self }
    }
}

/// Everything computed for one pair of regions at one temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub setup: PairSetup,
    pub temperature: f64,
    /// `sum_l I^R_l I^Q_l` before orthogonalisation.
    pub raw_residual: f64,
    pub orthogonalized: bool,
    /// `max |sum_l I_l^2 - 1|` over the two verdict-bearing mode vectors.
    pub norm_deviation: f64,
    /// `nu_minus` of the CM built from the unrepaired modes (NaN if that
    /// matrix is not positive definite).
    pub as_constructed_nu_minus: f64,
    pub as_constructed_physical: bool,
    /// Assembly of the canonical pair; this CM carries the verdict.
    pub report: CmAssemblyReport,
    pub verdict: SeparabilityVerdict,
    /// NaN when the verdict is `PhysicalityViolated`.
    pub purity: f64,
    pub purity_threshold: f64,
}

impl PairEvaluation {
    pub fn log_negativity(&self) -> f64 {
        self.verdict.log_negativity
    }

    pub fn is_entangled(&self) -> bool {
        self.verdict.verdict == Verdict::Entangled
    }

    /// Entanglement predicted by the purity bound `mu > 1/sqrt(AB + CD - 2EF - 1)`.
    pub fn purity_predicts_entangled(&self) -> bool {
        self.purity > self.purity_threshold
    }

    /// A note when the purity bound disagrees with the `nu_minus_pt` verdict.
    pub fn purity_mismatch(&self) -> Option<String> {
        if !self.verdict.is_valid() || self.purity_predicts_entangled() == self.is_entangled() {
            return None;
        }
        Some(format!(
            "purity {:.17e} vs threshold {:.17e} disagrees with verdict {} \
             (nu_minus_pt = {:.17e}, direct separability expression = {:.17e}, determinant form = {:.17e})",
            self.purity,
            self.purity_threshold,
            self.verdict.verdict,
            self.verdict.nu_minus_pt,
            self.verdict.sep_expr_direct,
            self.verdict.sep_expr_det,
        ))
    }

    pub fn flags(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if self.orthogonalized {
            flags.push("orthogonalized");
        }
        if !self.as_constructed_physical {
            flags.push("as_constructed_unphysical");
        }
        if self.verdict.verdict == Verdict::PhysicalityViolated {
            flags.push("physicality_violated");
        }
        if self.verdict.direct_sign_mismatch() {
            flags.push("direct_sign_mismatch");
        }
        if self.purity_mismatch().is_some() {
            flags.push("purity_mismatch");
        }
        flags
    }
}

fn nu_minus_or_nan(report: &CmAssemblyReport) -> f64 {
    if !report.cm.is_positive_definite() {
        return f64::NAN;
    }
    invariants(&report.cm)
        .and_then(|inv| symplectic_eigenvalues(&inv))
        .map(|(_, m)| m)
        .unwrap_or(f64::NAN)
}

/// Builds both spatial modes, repairs their commutators, assembles the CM and
/// runs the separability test.
pub fn evaluate_pair(setup: &PairSetup, cfg: &ThermalFieldConfig) -> Result<PairEvaluation> {
    if setup.region_r.overlaps(&setup.region_q) {
        return Err(Error::InvalidInput(format!(
            "regions [{}, {}] and [{}, {}] overlap",
            setup.region_r.x1, setup.region_r.x2, setup.region_q.x1, setup.region_q.x2
        )));
    }
    let trunc = &setup.truncation;
    let mv_r = overlap_coefficients(&setup.region_r, &setup.profile, trunc, cfg)?;
    let mv_q = overlap_coefficients(&setup.region_q, &setup.profile, trunc, cfg)?;

    let as_built = assemble_cm(&mv_r, &mv_q, cfg, trunc)?;
    let (mv_r, mv_q, raw_residual, orthogonalized) = canonical_pair(mv_r, mv_q, setup.residual_gate)?;
    let norm_deviation = (mv_r.norm_sq() - 1.0).abs().max((mv_q.norm_sq() - 1.0).abs());
    let report = if orthogonalized {
        assemble_cm(&mv_r, &mv_q, cfg, trunc)?
    } else {
        as_built.clone()
    };
    let cm = report.verdict_cm(setup.residual_gate)?;

    let as_constructed_nu_minus = nu_minus_or_nan(&as_built);
    let as_constructed_physical = as_built.all_converged() && is_physical(&as_built.cm);

    let mut verdict = separability_test(&cm)?;
    if setup.gate == PhysicalityGate::AsConstructed && !as_constructed_physical {
        verdict = SeparabilityVerdict {
            verdict: Verdict::PhysicalityViolated,
            nu_minus: as_constructed_nu_minus,
            nu_minus_pt: f64::NAN,
            sep_expr_direct: f64::NAN,
            sep_expr_det: f64::NAN,
            log_negativity: 0.0,
        };
    }
    let purity = if verdict.is_valid() {
        purity(&cm)?
    } else {
        f64::NAN
    };
    Ok(PairEvaluation {
        setup: *setup,
        temperature: cfg.temperature(),
        raw_residual,
        orthogonalized,
        norm_deviation,
        as_constructed_nu_minus,
        as_constructed_physical,
        purity_threshold: purity_threshold(&cm),
        report,
        verdict,
        purity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub profile: DetectorProfile,
    /// Width of both regions.
    pub width: f64,
    pub separations: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub truncation: TruncationSpec,
    pub gate: PhysicalityGate,
    pub residual_gate: f64,
    /// Midpoint of the pair; `None` centres it on `L/2`.
    pub centre: Option<f64>,
}

impl SweepSpec {
    pub fn new(profile: DetectorProfile, width: f64, separations: Vec<f64>, temperatures: Vec<f64>, truncation: TruncationSpec) -> Self {
        Self {
            profile,
            width,
            separations,
            temperatures,
            truncation,
            gate: PhysicalityGate::Canonical,
            residual_gate: RESIDUAL_GATE,
            centre: None,
        }
    }

    pub fn regions(&self, separation: f64, box_length: f64) -> Result<(Region, Region)> {
        let centre = self.centre.unwrap_or(0.5 * box_length);
        let (r, q) = Region::symmetric_pair(self.width, separation, 2.0 * centre)?;
        r.check_inside(box_length)?;
        q.check_inside(box_length)?;
        Ok((r, q))
    }

    pub fn validate(&self, cfg: &ThermalFieldConfig) -> Result<()> {
        if self.separations.is_empty() || self.temperatures.is_empty() {
            return Err(Error::InvalidInput("sweep grid is empty".into()));
        }
        if self.temperatures.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidInput("temperatures must be finite and non-negative".into()));
        }
        self.truncation.validate()?;
        for &s in &self.separations {
            self.regions(s, cfg.box_length())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointOutcome {
    Evaluated(Box<PairEvaluation>),
    Failed { kind: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub separation: f64,
    pub temperature: f64,
    pub outcome: PointOutcome,
}

impl SweepPoint {
    pub fn evaluation(&self) -> Option<&PairEvaluation> {
        match &self.outcome {
            PointOutcome::Evaluated(e) => Some(e),
            PointOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Row-major: separation outer, temperature inner.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, i_sep: usize, i_temp: usize) -> &SweepPoint {
        &self.points[i_sep * self.spec.temperatures.len() + i_temp]
    }

    /// `log_negativity[i_sep][i_temp]`, `None` where the point failed or is unphysical.
    pub fn log_negativity_grid(&self) -> Vec<Vec<Option<f64>>> {
        let nt = self.spec.temperatures.len();
        self.points
            .chunks(nt)
            .map(|row| {
                row.iter()
                    .map(|p| p.evaluation().filter(|e| e.verdict.is_valid()).map(|e| e.log_negativity()))
                    .collect()
            })
            .collect()
    }
}

/// Evaluates every `(separation, temperature)` point. Point failures are
/// recorded in place; only an invalid spec aborts.
pub fn run_sweep(spec: &SweepSpec, cfg: &ThermalFieldConfig) -> Result<SweepResult> {
    spec.validate(cfg)?;
    let grid: Vec<(f64, f64)> = spec
        .separations
        .iter()
        .flat_map(|&s| spec.temperatures.iter().map(move |&t| (s, t)))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(separation, temperature)| {
            let outcome = (|| {
                let (r, q) = spec.regions(separation, cfg.box_length())?;
                let setup = PairSetup {
                    gate: spec.gate,
                    residual_gate: spec.residual_gate,
                    ..PairSetup::new(r, q, spec.profile, spec.truncation)
                };
                evaluate_pair(&setup, &cfg.with_temperature(temperature)?)
            })();
            SweepPoint {
                separation,
                temperature,
                outcome: match outcome {
                    Ok(e) => PointOutcome::Evaluated(Box::new(e)),
                    Err(e) => PointOutcome::Failed {
                        kind: e.kind().to_string(),
                        message: e.to_string(),
                    },
                },
            }
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        points,
    })
}

/// Top-hat detection of two regions touching at `L/2`, with the state
/// restricted to momenta `1..=l_max`.
pub fn touching_window_setup(width: f64, l_max: usize, box_length: f64) -> Result<PairSetup> {
    let (r, q) = Region::symmetric_pair(width, 0.0, box_length)?;
    Ok(PairSetup::new(r, q, DetectorProfile::TopHat, TruncationSpec::window(l_max))
        .with_gate(PhysicalityGate::AsConstructed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub l_max: usize,
    /// `None` when the pair cannot be made canonical (e.g. a single mode).
    pub verdict: Option<Verdict>,
    pub log_negativity: f64,
    pub as_constructed_nu_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    pub width: f64,
    pub temperature: f64,
    pub cap: usize,
    /// First window size giving an entangled, physical state.
    pub dk_min: Option<usize>,
    /// Last window size of the entangled run that starts at `dk_min`.
    pub dk_max: Option<usize>,
    /// The entangled run reached `cap`.
    pub open_window: bool,
    pub entries: Vec<WindowEntry>,
}

fn window_entry(width: f64, l_max: usize, cfg: &ThermalFieldConfig) -> Result<WindowEntry> {
    let setup = touching_window_setup(width, l_max, cfg.box_length())?;
    match evaluate_pair(&setup, cfg) {
        Ok(e) => Ok(WindowEntry {
            l_max,
            verdict: Some(e.verdict.verdict),
            log_negativity: e.log_negativity(),
            as_constructed_nu_minus: e.as_constructed_nu_minus,
        }),
        Err(Error::CannotOrthogonalize { .. }) | Err(Error::DegenerateMode { .. }) => Ok(WindowEntry {
            l_max,
            verdict: None,
            log_negativity: 0.0,
            as_constructed_nu_minus: f64::NAN,
        }),
        Err(e) => Err(e),
    }
}

/// Scans window sizes `1..=cap` at the temperature of `cfg`.
pub fn momentum_window_scan(width: f64, cfg: &ThermalFieldConfig, cap: usize) -> Result<WindowScan> {
    if cap == 0 {
        return Err(Error::InvalidInput("window cap must be positive".into()));
    }
    let entries = (1..=cap)
        .into_par_iter()
        .map(|l| window_entry(width, l, cfg))
        .collect::<Result<Vec<_>>>()?;
    let entangled = |e: &WindowEntry| e.verdict == Some(Verdict::Entangled);
    let first = entries.iter().position(entangled);
    let (dk_min, dk_max, open_window) = match first {
        None => (None, None, false),
        Some(i) => {
            let run = entries[i..].iter().take_while(|e| entangled(e)).count();
            let last = i + run - 1;
            (Some(entries[i].l_max), Some(entries[last].l_max), last + 1 == entries.len())
        }
    };
    Ok(WindowScan {
        width,
        temperature: cfg.temperature(),
        cap,
        dk_min,
        dk_max,
        open_window,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcRoute {
    /// Gaussian-modulated detection of the untouched thermal state.
    GaussianModulated,
    /// Top-hat detection; entangled if any momentum window up to the cap is.
    TruncatedTopHat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcOptions {
    pub window_cap: usize,
    pub series_l_max: usize,
    /// Bisection stops once `hi - lo <= rel_width * hi`.
    pub rel_width: f64,
    pub t_start: f64,
    pub t_limit: f64,
}

impl Default for TcOptions {
    fn default() -> Self {
        Self {
            window_cap: 256,
            series_l_max: 1000,
            rel_width: 1e-3,
            t_start: 1.0,
            t_limit: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcStatus {
    Bracketed,
    /// Separable already at `T = 0`; `t_c` is reported as 0.
    NotEntangled,
    /// Still entangled at `t_limit`.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcResult {
    pub width: f64,
    pub route: TcRoute,
    pub status: TcStatus,
    pub t_c: f64,
    /// Entangled at `lo`, separable at `hi`.
    pub lo: f64,
    pub hi: f64,
}

/// Whether regions of `width` touching at `L/2` are entangled at the
/// temperature of `cfg`, on the given route.
pub fn entangled_at(width: f64, cfg: &ThermalFieldConfig, route: TcRoute, opts: &TcOptions) -> Result<bool> {
    match route {
        TcRoute::GaussianModulated => {
            let (r, q) = Region::symmetric_pair(width, 0.0, cfg.box_length())?;
            let setup = PairSetup::new(
                r,
                q,
                DetectorProfile::gaussian(),
                TruncationSpec::series(opts.series_l_max),
            );
            Ok(evaluate_pair(&setup, cfg)?.is_entangled())
        }
        TcRoute::TruncatedTopHat => {
            for l_max in 2..=opts.window_cap {
                if window_entry(width, l_max, cfg)?.verdict == Some(Verdict::Entangled) {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Bisects the temperature at which entanglement of two touching regions disappears.
pub fn critical_temperature(width: f64, cfg: &ThermalFieldConfig, route: TcRoute, opts: &TcOptions) -> Result<TcResult> {
    let ind = |t: f64| entangled_at(width, &cfg.with_temperature(t)?, route, opts);
    let result = |status, t_c, lo, hi| TcResult {
        width,
        route,
        status,
        t_c,
        lo,
        hi,
    };
    if !ind(0.0)? {
        return Ok(result(TcStatus::NotEntangled, 0.0, 0.0, 0.0));
    }
    let (mut lo, mut hi) = (0.0, opts.t_start);
    while ind(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > opts.t_limit {
            return Ok(result(TcStatus::Unbounded, f64::INFINITY, lo, f64::INFINITY));
        }
    }
    // re-entrance above the bracket would make the bisection meaningless
    for probe in [2.0 * hi, 4.0 * hi] {
        if ind(probe)? {
            return Err(Error::NonMonotone { lo: hi, hi: probe });
        }
    }
    while hi - lo > opts.rel_width * hi {
        let mid = 0.5 * (lo + hi);
        if ind(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(result(TcStatus::Bracketed, 0.5 * (lo + hi), lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual in natural-log space.
    pub residual: f64,
}

/// Least-squares fit of `y = a x^p` as a straight line in log-log coordinates.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain("power-law fit needs finite positive data".into()));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(PowerLawFit {
        exponent: slope,
        amplitude: intercept.exp(),
        residual: (rss / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalTemperatureCurve {
    pub route: TcRoute,
    pub results: Vec<TcResult>,
    /// `(width, T_C)` for every bracketed width.
    pub points: Vec<(f64, f64)>,
    pub fit: PowerLawFit,
}

impl CriticalTemperatureCurve {
    pub const MIN_POINTS: usize = 6;
}

/// `T_C` for each width, in input order.
pub fn critical_temperatures(widths: &[f64], cfg: &ThermalFieldConfig, route: TcRoute, opts: &TcOptions) -> Result<Vec<TcResult>> {
    widths
        .par_iter()
        .map(|&w| critical_temperature(w, cfg, route, opts))
        .collect()
}

/// `T_C` over several region widths plus a power-law fit of the bracketed ones.
pub fn critical_temperature_curve(
    widths: &[f64],
    cfg: &ThermalFieldConfig,
    route: TcRoute,
    opts: &TcOptions,
) -> Result<CriticalTemperatureCurve> {
    let results = critical_temperatures(widths, cfg, route, opts)?;
    let points: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.status == TcStatus::Bracketed)
        .map(|r| (r.width, r.t_c))
        .collect();
    if points.len() < CriticalTemperatureCurve::MIN_POINTS {
        return Err(Error::Domain(format!(
            "only {} of {} widths have a finite critical temperature; need {}",
            points.len(),
            widths.len(),
            CriticalTemperatureCurve::MIN_POINTS
        )));
    }
    let fit = fit_power_law(&points)?;
    Ok(CriticalTemperatureCurve {
        route,
        results,
        points,
        fit,
    })
}

/// `count` values spaced logarithmically from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => {
            let (a, b) = (start.ln(), stop.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// `count` values spaced linearly from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Sign tolerance shared with the symplectic layer, re-exported for reports.
pub const VERDICT_TOL: f64 = NU_TOL;
