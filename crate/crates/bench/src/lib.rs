//! Fixtures shared by the criterion benches.

use spatent_core::{CovarianceMatrix4, DetectorProfile, PairSetup, Region, TruncationSpec};

/// Gaussian-modulated pair of width 0.1 a distance 0.1 apart, centred in the unit box.
pub fn gaussian_pair(l_max: usize) -> PairSetup {
    let (r, q) = Region::symmetric_pair(0.1, 0.1, 1.0).expect("fits in the box");
    PairSetup::new(r, q, DetectorProfile::gaussian(), TruncationSpec::series(l_max))
}

pub fn sample_cm() -> CovarianceMatrix4 {
    CovarianceMatrix4::two_mode_squeezed(0.7)
}
