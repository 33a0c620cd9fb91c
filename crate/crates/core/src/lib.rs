//! Spatial-mode entanglement of a thermal Bose field in a 1D box.
//!
//! Two disjoint regions of the box each define a bosonic mode through a
//! detector profile. The pair is Gaussian, so its covariance matrix decides
//! separability through the smallest symplectic eigenvalue of the partial
//! transpose. On top of that sit temperature and separation sweeps,
//! momentum-window scans, critical temperatures, and a perturbative
//! transfer of the correlations onto two probe qubits.

pub mod analysis;
pub mod error;
pub mod export;
pub mod extraction;
pub mod field;
pub mod modes;
pub mod sampling;
pub mod selftest;
pub mod symplectic;

pub use analysis::{
    critical_temperature, critical_temperature_curve, evaluate_pair, fit_power_law, momentum_window_scan,
    run_sweep, CriticalTemperatureCurve, PairEvaluation, PairSetup, PhysicalityGate, PowerLawFit, SweepResult,
    SweepSpec, TcOptions, TcResult, TcRoute, TcStatus, WindowScan,
};
pub use error::{Error, ErrorClass, Result};
pub use extraction::{extraction_test, ppt_probe_oracle, probe_state, ProbeCoupling, ProbePairState};
pub use field::{mode_function, thermal_factor, FieldMode, ThermalFieldConfig};
pub use modes::{
    assemble_cm, cross_commutator_residual, orthogonalize_pair, overlap_coefficients, CmAssemblyReport,
    DetectorProfile, ModeVector, Region, TruncationKind, TruncationSpec,
};
pub use symplectic::{
    eigen_oracle, invariants, is_physical, partial_transpose, purity, purity_threshold, separability_test,
    symplectic_eigenvalues, CovarianceMatrix4, SeparabilityVerdict, SymplecticInvariants, Verdict,
};
