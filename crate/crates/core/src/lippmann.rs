//! Discretized self-consistency `psi(x) = int G_E(x - x') W(x') psi(x') dx'`.
//!
//! The map only acts through the range of the coupling matrices, so it is
//! solved in a reduced basis: with `U` an orthonormal basis of that range and
//! `chi_j = U^H psi(x_j)` on the sites where `W` is nonzero,
//! `chi_k = sum_j w_j U^H G(x_k - x_j) U What_j chi_j`, `What_j = U^H W_j U`.
//! The reduced matrix has the same nonzero spectrum as the full map.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{self, GreenKernel};
use crate::grid::{Grid, SpinorField};
use crate::linalg::{self, c64, cr, CMat, DenseOp};
use crate::potential::{Coupling, PotentialSpec};
use crate::spectral::{self, BandModel, RegionTag};

/// Largest allowed phase advance per grid step at a real pole.
pub const MAX_PHASE_STEP: f64 = 0.3;
/// Operator eigenvalues farther than this from 1 do not count as solutions.
pub const MAX_EIGEN_DISTANCE: f64 = 0.5;
pub const ACCEPT_RESIDUAL: f64 = 1e-6;

/// Model, localized coupling and grid, with the coupling pre-sampled.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: BandModel,
    pub coupling: Coupling,
    pub grid: Grid,
    w: Vec<CMat>,
    basis: CMat,
    active: Vec<usize>,
    w_hat: Vec<CMat>,
    real: bool,
}

impl Setup {
    /// `V(x) B` with `B` taken from the model.
    pub fn new(model: BandModel, potential: PotentialSpec, grid: Grid) -> Result<Self> {
        let b = model.b().clone();
        Self::with_coupling(model, Coupling::scalar(potential, b), grid)
    }

    pub fn with_coupling(model: BandModel, coupling: Coupling, grid: Grid) -> Result<Self> {
        coupling.validate(model.n_bands())?;
        let w = coupling.sample(&grid)?;
        let basis = range_basis(&coupling)?;
        let active: Vec<usize> = (0..grid.n_points).filter(|&i| !linalg::is_zero(&w[i])).collect();
        let w_hat = active
            .iter()
            .map(|&i| basis.adjoint() * &w[i] * &basis)
            .collect();
        let real = model.is_real() && coupling.is_real();
        Ok(Setup { model, coupling, grid, w, basis, active, w_hat, real })
    }

    pub fn regrid(&self, grid: Grid) -> Result<Self> {
        Self::with_coupling(self.model.clone(), self.coupling.clone(), grid)
    }

    pub fn n_channels(&self) -> usize {
        self.model.n_bands()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `W(x_i)`.
    pub fn coupling_at(&self, i: usize) -> &CMat {
        &self.w[i]
    }

    pub fn active_sites(&self) -> &[usize] {
        &self.active
    }

    fn check_resolution(&self, energy: f64) -> Result<()> {
        let set = spectral::poles(&self.model, energy)?;
        let pmax = set.real_momenta().into_iter().fold(0.0, f64::max);
        let step = pmax * self.grid.dx;
        if step > MAX_PHASE_STEP {
            return Err(Error::GridTooCoarse(step));
        }
        Ok(())
    }
}

/// Orthonormal basis of the joint range of the coupling matrices.
fn range_basis(coupling: &Coupling) -> Result<CMat> {
    let n = coupling.n_channels();
    let k = coupling.terms.len();
    let stacked = Mat::<c64>::from_fn(n, n * k, |i, j| coupling.terms[j / n].1[(i, j % n)]);
    let svd = stacked.svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i].re).fold(0.0, f64::max);
    let rank = (0..s.nrows()).filter(|&i| s[i].re > 1e-12 * smax && smax > 0.0).count();
    let u = svd.U();
    Ok(Mat::from_fn(n, rank, |i, j| u[(i, j)]))
}

/// `G(d dx)` for `d = -(n-1) ..= n-1`, indexed by `d + n - 1`.
fn tabulate(kernel: &GreenKernel, grid: &Grid) -> Vec<CMat> {
    let n = grid.n_points as isize;
    (-(n - 1)..n).map(|d| kernel.evaluate(d as f64 * grid.dx)).collect()
}

/// The full `(n N) x (n N)` map with blocks `G(x_i - x_j) W(x_j) w_j`.
pub fn assemble_map(setup: &Setup, energy: f64) -> Result<CMat> {
    setup.check_resolution(energy)?;
    let kernel = green::residue_green(&setup.model, energy)?;
    let table = tabulate(&kernel, &setup.grid);
    let (n, nc) = (setup.grid.n_points, setup.n_channels());
    let gw: Vec<CMat> = (0..n)
        .map(|j| setup.w[j].clone() * faer::Scale(cr(setup.grid.weight(j))))
        .collect();
    let mut m = Mat::<c64>::zeros(n * nc, n * nc);
    for i in 0..n {
        for j in 0..n {
            if linalg::is_zero(&setup.w[j]) {
                continue;
            }
            let block = &table[i + n - 1 - j] * &gw[j];
            for a in 0..nc {
                for b in 0..nc {
                    m[(i * nc + a, j * nc + b)] = block[(a, b)];
                }
            }
        }
    }
    Ok(m)
}

struct Reduced {
    op: DenseOp,
    /// `G(d dx) U`, indexed like `tabulate`.
    gu: Vec<CMat>,
    table: Vec<CMat>,
}

fn reduced_map(setup: &Setup, energy: f64) -> Result<Reduced> {
    setup.check_resolution(energy)?;
    let kernel = green::residue_green(&setup.model, energy)?;
    let table = tabulate(&kernel, &setup.grid);
    let u = &setup.basis;
    let gu: Vec<CMat> = table.iter().map(|g| g * u).collect();
    let ugu: Vec<CMat> = gu.iter().map(|g| u.adjoint() * g).collect();
    let r = setup.rank();
    let n = setup.grid.n_points;
    let na = setup.active.len();
    let dim = na * r;
    let right: Vec<CMat> = setup
        .active
        .iter()
        .zip(&setup.w_hat)
        .map(|(&j, wh)| wh * faer::Scale(cr(setup.grid.weight(j))))
        .collect();
    let entry = |row: usize, col: usize| -> c64 {
        let (k, a) = (row / r, row % r);
        let (j, b) = (col / r, col % r);
        let t = &ugu[setup.active[k] + n - 1 - setup.active[j]];
        let mut acc = cr(0.0);
        for c in 0..r {
            acc += t[(a, c)] * right[j][(c, b)];
        }
        acc
    };
    let op = if setup.real {
        DenseOp::Real(Mat::from_fn(dim, dim, |i, j| entry(i, j).re))
    } else {
        DenseOp::Complex(Mat::from_fn(dim, dim, entry))
    };
    Ok(Reduced { op, gu, table })
}

/// Eigenvalue of the map nearest 1.
pub fn nearest_unit_eigenvalue(setup: &Setup, energy: f64) -> Result<c64> {
    if setup.active.is_empty() {
        return Err(Error::NoNearUnitEigenvalue { re: 0.0, im: 0.0 });
    }
    let red = reduced_map(setup, energy)?;
    Ok(linalg::nearest_eigenpair(&red.op, cr(1.0))?.0)
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub energy: f64,
    pub operator_eigenvalue: c64,
    pub state: SpinorField,
    /// `||psi - T psi|| / ||psi||`.
    pub fixed_point_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub fixed_point_residual: f64,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            energy: self.energy,
            eigenvalue_re: self.operator_eigenvalue.re,
            eigenvalue_im: self.operator_eigenvalue.im,
            fixed_point_residual: self.fixed_point_residual,
        }
    }
}

/// Solve the map at a fixed energy; the state is scaled to unit peak amplitude.
pub fn solve_state(setup: &Setup, energy: f64) -> Result<SolveReport> {
    if setup.active.is_empty() {
        return Err(Error::NoNearUnitEigenvalue { re: 0.0, im: 0.0 });
    }
    let red = reduced_map(setup, energy)?;
    let (lambda, chi) = linalg::nearest_eigenpair(&red.op, cr(1.0))?;
    if (lambda - 1.0).norm() > MAX_EIGEN_DISTANCE {
        return Err(Error::NoNearUnitEigenvalue { re: lambda.re, im: lambda.im });
    }
    let (n, nc, r) = (setup.grid.n_points, setup.n_channels(), setup.rank());

    // psi(x_k) = (1/lambda) sum_j w_j G(x_k - x_j) U What_j chi_j
    let sources: Vec<Vec<c64>> = setup
        .active
        .iter()
        .enumerate()
        .map(|(jj, &j)| {
            let x: Vec<c64> = (0..r).map(|b| chi[jj * r + b]).collect();
            linalg::mat_vec(&setup.w_hat[jj], &x)
                .into_iter()
                .map(|z| z * setup.grid.weight(j))
                .collect()
        })
        .collect();
    let inv = lambda.inv();
    let values: Vec<c64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut acc = vec![cr(0.0); nc];
            for (jj, &j) in setup.active.iter().enumerate() {
                let gu = &red.gu[k + n - 1 - j];
                for a in 0..nc {
                    for b in 0..r {
                        acc[a] += gu[(a, b)] * sources[jj][b];
                    }
                }
            }
            acc.into_iter().map(move |z| z * inv)
        })
        .collect();
    let mut state = SpinorField::new(setup.grid, nc, values)?;
    state.normalize_max();
    let fixed_point_residual = map_residual(setup, &red.table, &state);
    Ok(SolveReport { energy, operator_eigenvalue: lambda, state, fixed_point_residual })
}

/// `||psi - T psi|| / ||psi||` with the full map applied to the sampled state.
fn map_residual(setup: &Setup, table: &[CMat], state: &SpinorField) -> f64 {
    let (n, nc) = (setup.grid.n_points, setup.n_channels());
    let sources: Vec<(usize, Vec<c64>)> = setup
        .active
        .iter()
        .map(|&j| {
            let wpsi = linalg::mat_vec(&setup.w[j], state.spinor(j));
            (j, wpsi.into_iter().map(|z| z * setup.grid.weight(j)).collect())
        })
        .collect();
    let (num, den) = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![cr(0.0); nc];
            for (j, s) in &sources {
                let g = &table[k + n - 1 - j];
                for a in 0..nc {
                    for b in 0..nc {
                        acc[a] += g[(a, b)] * s[b];
                    }
                }
            }
            let psi = state.spinor(k);
            let d: f64 = acc.iter().zip(psi).map(|(t, p)| (p - t).norm_sqr()).sum();
            let p: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            (d, p)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (num / den).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindOptions {
    /// Energies in the coarse scan.
    pub mesh: usize,
    /// Points of the scan grid (same extent); `None` scans on the solver grid.
    pub scan_points: Option<usize>,
    pub tol_energy: f64,
    pub max_iter: usize,
}

impl Default for FindOptions {
    fn default() -> Self {
        FindOptions { mesh: 200, scan_points: Some(512), tol_energy: 1e-9, max_iter: 60 }
    }
}

/// Scan `Re lambda(E) - 1` over `[e_lo, e_hi]`, refine each bracketed crossing
/// by safeguarded secant steps and return every accepted solution.
pub fn find_energy(setup: &Setup, e_lo: f64, e_hi: f64, opts: &FindOptions) -> Result<Vec<SolveReport>> {
    if !(e_lo < e_hi) || opts.mesh < 2 {
        return Err(Error::NoSolutionInRange { lo: e_lo, hi: e_hi });
    }
    for e in [e_lo, e_hi] {
        if spectral::classify_region(&setup.model, e)?.tag != RegionTag::Mixed {
            return Err(Error::OutsideMixedRegion(e));
        }
    }
    let scan = match opts.scan_points {
        Some(p) if p < setup.grid.n_points => setup.regrid(Grid::symmetric(setup.grid.half_width(), p)?)?,
        _ => setup.clone(),
    };
    let step = (e_hi - e_lo) / (opts.mesh - 1) as f64;
    let energies: Vec<f64> = (0..opts.mesh).map(|k| e_lo + step * k as f64).collect();
    let lambdas: Vec<Option<c64>> = energies
        .par_iter()
        .map(|&e| nearest_unit_eigenvalue(&scan, e).ok())
        .collect();

    let near = |l: c64| (l - 1.0).norm() < MAX_EIGEN_DISTANCE;
    let mut brackets = Vec::new();
    for k in 0..opts.mesh - 1 {
        if let (Some(a), Some(b)) = (lambdas[k], lambdas[k + 1]) {
            let crossing = (a.re - 1.0).signum() != (b.re - 1.0).signum() || a.re == 1.0;
            if crossing && near(a) && near(b) && (a - b).norm() < MAX_EIGEN_DISTANCE {
                brackets.push((energies[k], energies[k + 1]));
            }
        }
    }
    log::debug!("find_energy: {} bracket(s) in [{e_lo}, {e_hi}]", brackets.len());

    let mut out: Vec<SolveReport> = Vec::new();
    for (a, b) in brackets {
        match refine_energy(setup, &scan, a, b, (e_lo, e_hi), opts) {
            Ok(report) if report.fixed_point_residual < ACCEPT_RESIDUAL => {
                if !out.iter().any(|r| (r.energy - report.energy).abs() < 10.0 * opts.tol_energy) {
                    out.push(report);
                }
            }
            Ok(report) => log::debug!(
                "rejecting E = {} with fixed-point residual {:e}",
                report.energy,
                report.fixed_point_residual
            ),
            Err(e) => log::debug!("refinement in [{a}, {b}] failed: {e}"),
        }
    }
    if out.is_empty() {
        return Err(Error::NoSolutionInRange { lo: e_lo, hi: e_hi });
    }
    Ok(out)
}

fn unit_offset(setup: &Setup, e: f64) -> Result<f64> {
    Ok(nearest_unit_eigenvalue(setup, e)?.re - 1.0)
}

/// Root of `Re lambda(E) = 1` from a scan bracket `[a, b]`.
///
/// The root is first converged on the scan grid, then followed onto the
/// solver grid by secant steps; if those wander off, a bracketed search on the
/// solver grid (widened by up to two bracket widths) takes over.
pub fn refine_energy(
    setup: &Setup,
    scan: &Setup,
    a: f64,
    b: f64,
    range: (f64, f64),
    opts: &FindOptions,
) -> Result<SolveReport> {
    let same = scan.grid == setup.grid;
    let coarse = bracketed_root(|e| unit_offset(scan, e), a, b, opts)?;
    if same {
        return solve_state(setup, coarse);
    }
    let width = b - a;
    let (lo, hi) = ((a - 2.0 * width).max(range.0), (b + 2.0 * width).min(range.1));
    let root = match secant_root(|e| unit_offset(setup, e), coarse, lo, hi, opts) {
        Ok(e) => e,
        Err(_) => {
            let (mut a, mut b) = (a, b);
            let f = |e| unit_offset(setup, e);
            let mut k = 0;
            while f(a)?.signum() == f(b)?.signum() {
                if k == 2 {
                    return Err(Error::NoConvergence("lost the bracket on the solver grid".into()));
                }
                k += 1;
                a = (a - width).max(range.0);
                b = (b + width).min(range.1);
            }
            bracketed_root(f, a, b, opts)?
        }
    };
    solve_state(setup, root)
}

/// Illinois variant of regula falsi.
fn bracketed_root(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, opts: &FindOptions) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoConvergence(format!("[{a}, {b}] does not bracket a root")));
    }
    let mut side = 0i32;
    for _ in 0..opts.max_iter {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
        if (b - a).abs() < opts.tol_energy {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(Error::NoConvergence(format!("no root to {:e} after {} steps", opts.tol_energy, opts.max_iter)))
}

/// Unbracketed secant iteration from `x0`, confined to `[lo, hi]`.
fn secant_root(f: impl Fn(f64) -> Result<f64>, x0: f64, lo: f64, hi: f64, opts: &FindOptions) -> Result<f64> {
    let mut x_prev = x0;
    let mut f_prev = f(x_prev)?;
    let mut x = x0 + 1e-6 * (1.0 + x0.abs());
    for _ in 0..12 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        let denom = fx - f_prev;
        if denom == 0.0 {
            break;
        }
        let next = x - fx * (x - x_prev) / denom;
        if !(next > lo && next < hi) {
            break;
        }
        if (next - x).abs() < opts.tol_energy {
            return Ok(next);
        }
        x_prev = x;
        f_prev = fx;
        x = next;
    }
    Err(Error::NoConvergence("secant iteration left the bracket".into()))
}

/// `L = max(10 / decay(V), 15 / kappa_min)`, `n = 2048`.
pub fn default_grid(model: &BandModel, coupling: &Coupling, energy: f64) -> Result<Grid> {
    let set = spectral::poles(model, energy)?;
    let kappa = set.upper().into_iter().map(|p| p.im).fold(f64::INFINITY, f64::min);
    let mut half = if kappa.is_finite() { 15.0 / kappa } else { 30.0 };
    if let Some(d) = coupling.decay_rate() {
        half = half.max(10.0 / d);
    }
    Grid::symmetric(half, 2048)
}
