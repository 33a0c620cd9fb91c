//! Free non-relativistic bosons in a 1D box of length `L` with hard walls.
//!
//! Defaults are natural units `hbar = k_B = 1`, `m = 1/2`, `L = 1`, in which
//! `k_l = pi l` and `E_l = pi^2 l^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalFieldConfig {
    box_length: f64,
    mass: f64,
    hbar: f64,
    k_b: f64,
    temperature: f64,
    chemical_potential: f64,
}

impl Default for ThermalFieldConfig {
    fn default() -> Self {
        Self {
            box_length: 1.0,
            mass: 0.5,
            hbar: 1.0,
            k_b: 1.0,
            temperature: 0.0,
            chemical_potential: 0.0,
        }
    }
}

impl ThermalFieldConfig {
    pub fn new(
        box_length: f64,
        mass: f64,
        hbar: f64,
        k_b: f64,
        temperature: f64,
        chemical_potential: f64,
    ) -> Result<Self> {
        let cfg = Self {
            box_length,
            mass,
            hbar,
            k_b,
            temperature,
            chemical_potential,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default units at temperature `t`.
    pub fn at_temperature(t: f64) -> Result<Self> {
        Self::default().with_temperature(t)
    }

    pub fn with_temperature(self, t: f64) -> Result<Self> {
        let cfg = Self {
            temperature: t,
            ..self
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_chemical_potential(self, mu: f64) -> Result<Self> {
        let cfg = Self {
            chemical_potential: mu,
            ..self
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let all_finite = [
            self.box_length,
            self.mass,
            self.hbar,
            self.k_b,
            self.temperature,
            self.chemical_potential,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("non-finite field parameter".into()));
        }
        if self.box_length <= 0.0 || self.mass <= 0.0 || self.hbar <= 0.0 || self.k_b <= 0.0 {
            return Err(Error::InvalidInput(
                "box length, mass, hbar and k_B must be positive".into(),
            ));
        }
        if self.temperature < 0.0 {
            return Err(Error::InvalidInput(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        let ground = self.mode(1)?.energy;
        if self.chemical_potential >= ground {
            return Err(Error::InvalidChemicalPotential {
                mu: self.chemical_potential,
                l: 1,
                energy: ground,
            });
        }
        Ok(())
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn k_b(&self) -> f64 {
        self.k_b
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn chemical_potential(&self) -> f64 {
        self.chemical_potential
    }

    pub fn mode(&self, l: usize) -> Result<FieldMode> {
        if l == 0 {
            return Err(Error::InvalidInput("mode index starts at 1".into()));
        }
        let k = PI * l as f64 / self.box_length;
        let p = self.hbar * k;
        Ok(FieldMode {
            index: l,
            wavenumber: k,
            energy: p * p / (2.0 * self.mass),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMode {
    pub index: usize,
    /// `k_l = pi l / L`
    pub wavenumber: f64,
    /// `E_l = (hbar k_l)^2 / 2m`
    pub energy: f64,
}

impl FieldMode {
    /// Dimensionless `k_l L`; its inverse square and square weight the
    /// position and momentum entries of the covariance matrix.
    pub fn scaled_wavenumber(&self, cfg: &ThermalFieldConfig) -> f64 {
        self.wavenumber * cfg.box_length
    }
}

/// `sqrt(2/L) sin(k_l x)` on `[0, L]`.
pub fn mode_function(mode: &FieldMode, cfg: &ThermalFieldConfig, x: f64) -> Result<f64> {
    let l = cfg.box_length;
    if !(0.0..=l).contains(&x) {
        return Err(Error::Domain(format!("position {x} outside box [0, {l}]")));
    }
    Ok((2.0 / l).sqrt() * (mode.wavenumber * x).sin())
}

/// `coth((E_l - mu) / 2 k_B T)`, exactly 1 at `T = 0`.
pub fn thermal_factor(mode: &FieldMode, cfg: &ThermalFieldConfig) -> Result<f64> {
    let gap = mode.energy - cfg.chemical_potential;
    if gap <= 0.0 {
        return Err(Error::InvalidChemicalPotential {
            mu: cfg.chemical_potential,
            l: mode.index,
            energy: mode.energy,
        });
    }
    if cfg.temperature == 0.0 {
        return Ok(1.0);
    }
    let arg = gap / (2.0 * cfg.k_b * cfg.temperature);
    Ok(1.0 / arg.tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_units_reproduce_integer_prefactors() {
        let cfg = ThermalFieldConfig::default();
        for l in 1..20 {
            let m = cfg.mode(l).unwrap();
            let lf = l as f64;
            assert_relative_eq!(m.wavenumber, PI * lf, max_relative = 1e-15);
            assert_relative_eq!(m.energy, PI * PI * lf * lf, max_relative = 1e-14);
            assert_relative_eq!(m.scaled_wavenumber(&cfg).powi(2), PI * PI * lf * lf, max_relative = 1e-14);
        }
    }

    #[test]
    fn mode_function_values() {
        let cfg = ThermalFieldConfig::default();
        let m1 = cfg.mode(1).unwrap();
        let m2 = cfg.mode(2).unwrap();
        assert_relative_eq!(mode_function(&m1, &cfg, 0.5).unwrap(), 2f64.sqrt());
        assert!(mode_function(&m2, &cfg, 0.5).unwrap().abs() < 1e-15);
        assert_eq!(mode_function(&m1, &cfg, 0.0).unwrap(), 0.0);
        assert!(mode_function(&m1, &cfg, 1.0).unwrap().abs() < 1e-15);
        assert!(matches!(mode_function(&m1, &cfg, 1.5), Err(Error::Domain(_))));
        assert!(matches!(mode_function(&m1, &cfg, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn thermal_factor_limits() {
        let cold = ThermalFieldConfig::at_temperature(0.0).unwrap();
        for l in [1, 5, 50] {
            assert_eq!(thermal_factor(&cold.mode(l).unwrap(), &cold).unwrap(), 1.0);
        }

        // (E_1 - mu) / 2T = ln 3 gives coth(ln 3) = 5/4
        let e1 = PI * PI;
        let t = e1 / (2.0 * 3f64.ln());
        let cfg = ThermalFieldConfig::at_temperature(t).unwrap();
        assert_relative_eq!(thermal_factor(&cfg.mode(1).unwrap(), &cfg).unwrap(), 1.25, max_relative = 1e-14);

        // high temperature: coth(x) ~ 1/x for small x
        let hot = ThermalFieldConfig::at_temperature(1e4).unwrap();
        for l in 1..=5 {
            let m = hot.mode(l).unwrap();
            let arg = m.energy / (2.0 * 1e4);
            assert!(arg < 0.05);
            let f = thermal_factor(&m, &hot).unwrap();
            let approx = 2.0 * 1e4 / m.energy;
            assert!((f - approx).abs() / f < 0.01);
        }
    }

    #[test]
    fn thermal_factor_monotone() {
        let temps = [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0];
        for l in 1..30 {
            let mut prev = 0.0;
            for t in temps {
                let cfg = ThermalFieldConfig::at_temperature(t).unwrap();
                let f = thermal_factor(&cfg.mode(l).unwrap(), &cfg).unwrap();
                assert!(f >= 1.0);
                if t > 0.0 {
                    assert!(f >= prev);
                }
                prev = f;
            }
        }
        let cfg = ThermalFieldConfig::at_temperature(50.0).unwrap();
        let mut prev = f64::INFINITY;
        for l in 1..200 {
            let f = thermal_factor(&cfg.mode(l).unwrap(), &cfg).unwrap();
            assert!(f <= prev && f >= 1.0);
            prev = f;
        }
        assert!(prev - 1.0 < 1e-12);
    }

    #[test]
    fn chemical_potential_must_stay_below_ground_energy() {
        let cfg = ThermalFieldConfig::default();
        assert!(matches!(
            cfg.with_chemical_potential(PI * PI + 0.1),
            Err(Error::InvalidChemicalPotential { l: 1, .. })
        ));
        assert!(cfg.with_chemical_potential(-5.0).is_ok());
        assert!(ThermalFieldConfig::at_temperature(-1.0).is_err());
        assert!(ThermalFieldConfig::new(0.0, 0.5, 1.0, 1.0, 1.0, 0.0).is_err());
    }
}
