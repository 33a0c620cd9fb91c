//! Built-in numerical checks against independent references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::fit_power_law;
use crate::extraction::{monte_carlo_fourth_moment, wick_fourth_moment};
use crate::field::{mode_function, ThermalFieldConfig};
use crate::sampling::random_physical_cm;
use crate::symplectic::{eigen_oracle, invariants, symplectic_eigenvalues};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTestOptions {
    pub seed: u64,
    /// Relative agreement required between closed-form and Schur eigenvalues.
    pub tolerance: f64,
    pub cm_samples: usize,
    pub mc_samples: usize,
    /// Allowed Monte-Carlo deviation in standard errors.
    pub sigma: f64,
    pub quadrature_tolerance: f64,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            seed: 20240611,
            tolerance: 1e-9,
            cm_samples: 1000,
            mc_samples: 1_000_000,
            sigma: 3.0,
            quadrature_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub options: SelfTestOptions,
    pub checks: Vec<CheckOutcome>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn symplectic_oracle(opts: &SelfTestOptions, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst = 0.0f64;
    for _ in 0..opts.cm_samples {
        let (cm, _) = random_physical_cm(rng);
        let closed = invariants(&cm).and_then(|i| symplectic_eigenvalues(&i));
        let oracle = eigen_oracle(&cm);
        let (Ok((p, m)), Ok((op, om))) = (closed, oracle) else {
            return outcome("symplectic_oracle", false, format!("evaluation failed for {cm:?}"));
        };
        worst = worst.max((p - op).abs() / op).max((m - om).abs() / om);
    }
    outcome(
        "symplectic_oracle",
        worst <= opts.tolerance,
        format!("{} matrices, worst relative deviation {worst:.3e} (tolerance {:.1e})", opts.cm_samples, opts.tolerance),
    )
}

fn wick_monte_carlo(opts: &SelfTestOptions, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let (cm, _) = random_physical_cm(rng);
    let exact = wick_fourth_moment(&cm);
    match monte_carlo_fourth_moment(&cm, opts.mc_samples, rng) {
        Ok(mc) => {
            let z = (mc.mean - exact).abs() / mc.std_error;
            outcome(
                "wick_monte_carlo",
                z <= opts.sigma,
                format!(
                    "Wick {exact:.6e}, sample mean {:.6e} +- {:.2e} ({z:.2} standard errors, limit {})",
                    mc.mean, mc.std_error, opts.sigma
                ),
            )
        }
        Err(e) => outcome("wick_monte_carlo", false, e.to_string()),
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

fn mode_orthonormality(opts: &SelfTestOptions) -> CheckOutcome {
    let cfg = ThermalFieldConfig::default();
    let len = cfg.box_length();
    let mut worst = 0.0f64;
    for l in 1..=10 {
        for m in l..=10 {
            let (ml, mm) = (cfg.mode(l).unwrap(), cfg.mode(m).unwrap());
            let integral = simpson(
                |x| mode_function(&ml, &cfg, x.clamp(0.0, len)).unwrap() * mode_function(&mm, &cfg, x.clamp(0.0, len)).unwrap(),
                0.0,
                len,
                20_000,
            );
            let expected = if l == m { 1.0 } else { 0.0 };
            worst = worst.max((integral - expected).abs());
        }
    }
    outcome(
        "mode_orthonormality",
        worst <= opts.quadrature_tolerance,
        format!("modes 1..=10, worst deviation {worst:.3e} (tolerance {:.1e})", opts.quadrature_tolerance),
    )
}

fn power_law(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let xs: Vec<f64> = (0..10).map(|i| 0.05 * 1.25f64.powi(i)).collect();
    let exact: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 3.0 * x.powf(-0.75))).collect();
    let noisy: Vec<(f64, f64)> = exact
        .iter()
        .map(|&(x, y)| (x, y * (1.0 + 0.05 * rng.random_range(-1.0..1.0))))
        .collect();
    match (fit_power_law(&exact), fit_power_law(&noisy)) {
        (Ok(a), Ok(b)) => {
            let ok = (a.exponent + 0.75).abs() < 1e-12 && (b.exponent + 0.75).abs() < 0.05;
            outcome(
                "power_law_fit",
                ok,
                format!("exact data exponent {:.15}, 5% noise exponent {:.4}", a.exponent, b.exponent),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome("power_law_fit", false, e.to_string()),
    }
}

pub fn run_selftest(opts: &SelfTestOptions) -> SelfTestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let checks = vec![
        symplectic_oracle(opts, &mut rng),
        wick_monte_carlo(opts, &mut rng),
        mode_orthonormality(opts),
        power_law(&mut rng),
    ];
    SelfTestReport { options: *opts, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SelfTestOptions {
        SelfTestOptions {
            cm_samples: 200,
            mc_samples: 200_000,
            ..SelfTestOptions::default()
        }
    }

    #[test]
    fn passes_with_defaults() {
        let r = run_selftest(&quick());
        assert!(r.passed(), "{:?}", r.first_failure());
        assert_eq!(r.checks.len(), 4);
    }

    #[test]
    fn impossible_tolerance_names_the_oracle_check() {
        let r = run_selftest(&SelfTestOptions {
            tolerance: 1e-30,
            ..quick()
        });
        assert!(!r.passed());
        assert_eq!(r.first_failure().unwrap().name, "symplectic_oracle");
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 4);
        assert!((v - 0.0).abs() < 1e-14);
    }
}
