//! Brute-force finite-difference diagonalization on a hard-wall box.
//!
//! `H = -(1/2m) d^2/dx^2 + a0 + a1 (-i d/dx) + W(x)` with a 3-point Laplacian
//! and a central first derivative. The off-diagonal blocks are built as exact
//! Hermitian conjugates of each other.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SpinorField};
use crate::linalg::{self, c64, cr, CMat, I};
use crate::potential::Coupling;
use crate::spectral::BandModel;

/// Largest matrix dimension `n_points * N` accepted for a dense solve.
pub const MAX_DIM: usize = 16384;
pub const MAX_K: usize = 20;

#[derive(Debug, Clone)]
enum FdMatrix {
    Real(Mat<f64>),
    Complex(CMat),
}

#[derive(Debug, Clone)]
pub struct FdHamiltonian {
    pub grid: Grid,
    pub n_channels: usize,
    matrix: FdMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationMetrics {
    pub ipr: f64,
    pub tail_mass: f64,
}

pub fn assemble(model: &BandModel, grid: &Grid, coupling: &Coupling) -> Result<FdHamiltonian> {
    let nc = model.n_bands();
    coupling.validate(nc)?;
    let dim = grid.n_points * nc;
    if dim > MAX_DIM {
        return Err(Error::GridTooLarge { dim, limit: MAX_DIM });
    }
    let w = coupling.sample(grid)?;
    let dx = grid.dx;
    let kin = 1.0 / (2.0 * model.mass() * dx * dx);

    // diagonal block: a0 + 2 kin + W_j; upper block (j, j+1): -kin - i a1 / (2 dx)
    let mut upper = linalg::scaled(model.a1(), -I / (2.0 * dx));
    for c in 0..nc {
        upper[(c, c)] -= cr(kin);
    }
    let mut full = linalg::zeros(dim, dim);
    for j in 0..grid.n_points {
        let o = j * nc;
        for r in 0..nc {
            for c in 0..nc {
                let mut d = model.a0()[(r, c)] + w[j][(r, c)];
                if r == c {
                    d += cr(2.0 * kin);
                }
                full[(o + r, o + c)] = d;
                if j + 1 < grid.n_points {
                    full[(o + r, o + nc + c)] = upper[(r, c)];
                    full[(o + nc + c, o + r)] = upper[(r, c)].conj();
                }
            }
        }
    }
    let matrix = if linalg::is_real(&full) {
        FdMatrix::Real(Mat::from_fn(dim, dim, |r, c| full[(r, c)].re))
    } else {
        FdMatrix::Complex(full)
    };
    Ok(FdHamiltonian { grid: grid.clone(), n_channels: nc, matrix })
}

impl FdHamiltonian {
    pub fn dim(&self) -> usize {
        self.grid.n_points * self.n_channels
    }

    pub fn is_real(&self) -> bool {
        matches!(self.matrix, FdMatrix::Real(_))
    }

    pub fn entry(&self, r: usize, c: usize) -> c64 {
        match &self.matrix {
            FdMatrix::Real(m) => cr(m[(r, c)]),
            FdMatrix::Complex(m) => m[(r, c)],
        }
    }

    /// `max |H - H^dagger|` relative to `max |H|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for r in 0..n {
            for c in r..n {
                let a = self.entry(r, c);
                diff = diff.max((a - self.entry(c, r).conj()).norm());
                scale = scale.max(a.norm());
            }
        }
        if scale > 0.0 { diff / scale } else { 0.0 }
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let err = |e| Error::Eigensolver(format!("{e:?}"));
        match &self.matrix {
            FdMatrix::Real(m) => m.self_adjoint_eigenvalues(Side::Lower).map_err(err),
            FdMatrix::Complex(m) => m.self_adjoint_eigenvalues(Side::Lower).map_err(err),
        }
    }
}

/// The `k` eigenpairs nearest `target`, in ascending energy, with `sum |psi|^2 dx = 1`.
pub fn eigen_near(h: &FdHamiltonian, target: f64, k: usize) -> Result<Vec<(f64, SpinorField)>> {
    if k == 0 || k > MAX_K {
        return Err(Error::InvalidModel(format!("k = {k} outside 1..={MAX_K}")));
    }
    let dim = h.dim();
    let err = |e| Error::Eigensolver(format!("{e:?}"));
    let (energies, vectors): (Vec<f64>, Box<dyn Fn(usize, usize) -> c64>) = match &h.matrix {
        FdMatrix::Real(m) => {
            let evd = m.self_adjoint_eigen(Side::Lower).map_err(err)?;
            let s: Vec<f64> = (0..dim).map(|i| evd.S().column_vector()[i]).collect();
            let u = evd.U().to_owned();
            (s, Box::new(move |r, c| cr(u[(r, c)])))
        }
        FdMatrix::Complex(m) => {
            let evd = m.self_adjoint_eigen(Side::Lower).map_err(err)?;
            let s: Vec<f64> = (0..dim).map(|i| evd.S().column_vector()[i].re).collect();
            let u = evd.U().to_owned();
            (s, Box::new(move |r, c| u[(r, c)]))
        }
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        (energies[a] - target).abs().total_cmp(&(energies[b] - target).abs()).then(a.cmp(&b))
    });
    order.truncate(k.min(dim));
    order.sort_unstable();
    order
        .into_iter()
        .map(|col| {
            let values = (0..dim).map(|r| vectors(r, col)).collect();
            let mut field = SpinorField::new(h.grid.clone(), h.n_channels, values)?;
            field.normalize_l2();
            fix_phase(&mut field);
            Ok((energies[col], field))
        })
        .collect()
}

// Largest component made real positive so output does not depend on solver sign choices.
fn fix_phase(field: &mut SpinorField) {
    let pivot = field
        .values()
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(cr(0.0));
    if pivot.norm() > 0.0 {
        field.scale(pivot.conj() / pivot.norm());
    }
}

pub fn localization(state: &SpinorField, x_cut: f64) -> Result<LocalizationMetrics> {
    let grid = &state.grid;
    if !(0.0..=grid.x_max()).contains(&x_cut) {
        return Err(Error::InvalidGrid(format!("x_cut = {x_cut} outside [0, {}]", grid.x_max())));
    }
    let (mut n2, mut n4, mut tail) = (0.0, 0.0, 0.0);
    for i in 0..grid.n_points {
        let d = state.local_norm(i).powi(2);
        n2 += d;
        n4 += d * d;
        if grid.x(i).abs() > x_cut {
            tail += d;
        }
    }
    if n2 == 0.0 {
        return Err(Error::InvalidGrid("zero state".into()));
    }
    Ok(LocalizationMetrics {
        ipr: n4 * grid.dx / (n2 * n2 * grid.dx * grid.dx),
        tail_mass: tail / n2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use approx::assert_abs_diff_eq;

    fn soc() -> (BandModel, Coupling) {
        let b = linalg::real_diag(&[1.0, 0.0]);
        let model = BandModel::spin_orbit(0.5, 1.0, b.clone(), 1.0).unwrap();
        (model, Coupling::scalar(PotentialSpec::SocBic { gamma: 0.5, nu: 0.7 }, b))
    }

    #[test]
    fn hermitian_and_real_for_soc() {
        let (model, coupling) = soc();
        let g = Grid::symmetric(10.0, 100).unwrap();
        let h = assemble(&model, &g, &coupling).unwrap();
        assert!(h.is_real());
        assert!(h.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn complex_model_stays_hermitian() {
        let a0 = linalg::from_rows(&[&[cr(0.2), c64::new(0.1, 0.3)], &[c64::new(0.1, -0.3), cr(-0.4)]]);
        let a1 = linalg::from_rows(&[&[cr(0.3), cr(0.2)], &[cr(0.2), cr(0.0)]]);
        let b = linalg::real_diag(&[1.0, 0.5]);
        let model = BandModel::new(1.3, a0, a1, b.clone()).unwrap();
        let coupling = Coupling::scalar(PotentialSpec::Delta { lambda: -1.0 }, b);
        let h = assemble(&model, &Grid::symmetric(5.0, 80).unwrap(), &coupling).unwrap();
        assert!(!h.is_real());
        assert!(h.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn single_band_delta_ground_state() {
        let model = BandModel::single_band(1.0, 1.0).unwrap();
        let coupling = Coupling::scalar(PotentialSpec::Delta { lambda: -1.0 }, linalg::real_diag(&[1.0]));
        let h = assemble(&model, &Grid::symmetric(20.0, 1024).unwrap(), &coupling).unwrap();
        let e0 = h.eigenvalues().unwrap()[0];
        assert_abs_diff_eq!(e0, -0.5, epsilon = 2e-2);
        let near = eigen_near(&h, -0.5, 1).unwrap();
        assert_abs_diff_eq!(near[0].0, e0, epsilon = 1e-10);
        assert_abs_diff_eq!(near[0].1.norm_sqr(), 1.0, epsilon = 1e-12);
        assert!(localization(&near[0].1, 10.0).unwrap().tail_mass < 1e-6);
    }

    #[test]
    fn free_two_band_bounded_by_band_bottom() {
        let b = linalg::real_diag(&[1.0, 0.0]);
        let model = BandModel::two_band(0.0, 1.0, b.clone(), 1.0).unwrap();
        let coupling = Coupling::scalar(PotentialSpec::Delta { lambda: 0.0 }, b);
        let h = assemble(&model, &Grid::symmetric(10.0, 200).unwrap(), &coupling).unwrap();
        let near = eigen_near(&h, -3.0, 4).unwrap();
        assert!(near.iter().all(|(e, _)| *e >= -1.0 - 1e-12));
        assert!(near.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn limits() {
        let (model, coupling) = soc();
        assert!(matches!(
            assemble(&model, &Grid::symmetric(30.0, 100_000).unwrap(), &coupling),
            Err(Error::GridTooLarge { .. })
        ));
        let h = assemble(&model, &Grid::symmetric(5.0, 64).unwrap(), &coupling).unwrap();
        assert!(eigen_near(&h, 0.0, 21).is_err());
    }

    #[test]
    fn localization_metrics() {
        let g = Grid::symmetric(20.0, 8001).unwrap();
        let mut f = SpinorField::from_fn(g.clone(), 1, |x| vec![cr((-x.abs()).exp())]).unwrap();
        f.normalize_l2();
        let m = localization(&f, 10.0).unwrap();
        assert_abs_diff_eq!(m.ipr, 0.5, epsilon = 1e-3);
        assert!(m.tail_mass < 1e-8);
        let flat = SpinorField::from_fn(g, 2, |_| vec![cr(1.0), cr(0.0)]).unwrap();
        assert_abs_diff_eq!(localization(&flat, 10.0).unwrap().tail_mass, 0.5, epsilon = 1e-3);
        assert!(localization(&flat, 25.0).is_err());
    }
}
