//! Fixtures shared by the benchmarks under benches/.

use bicforge_core::lippmann::Setup;
use bicforge_core::linalg::real_diag;
use bicforge_core::{BandModel, Coupling, Grid, PotentialSpec, Result};

pub const GAMMA: f64 = 0.5;
pub const NU: f64 = 0.7;

pub fn soc_model() -> Result<BandModel> {
    BandModel::spin_orbit(GAMMA, 1.0, real_diag(&[1.0, 0.0]), 1.0)
}

pub fn soc_coupling() -> Coupling {
    Coupling::scalar(PotentialSpec::SocBic { gamma: GAMMA, nu: NU }, real_diag(&[1.0, 0.0]))
}

pub fn soc_setup(half_width: f64, n: usize) -> Result<Setup> {
    Setup::with_coupling(soc_model()?, soc_coupling(), Grid::symmetric(half_width, n)?)
}

pub fn e_bic() -> f64 {
    bicforge_core::potential::e_bic_analytic(GAMMA, NU, 1.0).expect("valid parameters")
}
