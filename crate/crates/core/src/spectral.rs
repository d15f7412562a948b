//! Band models, the dispersion determinant and its momentum poles.
//!
//! A model is `H0(p) = p^2/(2m) + a0 + a1 p` acting on `n_bands` channels,
//! plus a localized coupling `V(x) b` handled by the solvers. At fixed
//! energy the poles are the roots of `det(E - H0(p))`, a polynomial of
//! degree `2 n_bands` in `p` with real coefficients.

use std::cmp::Ordering;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, pauli, CMat, Poly};

const HERMITIAN_TOL: f64 = 1e-12;
/// A root is real iff `|Im p| < REAL_TOL * (1 + |Re p|)`.
pub const REAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct BandModel {
    n_bands: usize,
    mass: f64,
    a0: CMat,
    a1: CMat,
    b: CMat,
}

impl BandModel {
    pub fn new(mass: f64, a0: CMat, a1: CMat, b: CMat) -> Result<Self> {
        let n = a0.nrows();
        if n == 0 {
            return Err(Error::InvalidModel("n_bands must be at least 1".into()));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidModel(format!("mass must be positive, got {mass}")));
        }
        for (name, m) in [("a0", &a0), ("a1", &a1), ("b", &b)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidModel(format!("{name} must be {n}x{n}")));
            }
            if !linalg::is_hermitian(m, HERMITIAN_TOL) {
                return Err(Error::InvalidModel(format!("{name} is not Hermitian")));
            }
        }
        Ok(BandModel { n_bands: n, mass, a0, a1, b })
    }

    pub fn single_band(mass: f64, lambda: f64) -> Result<Self> {
        Self::new(
            mass,
            linalg::zeros(1, 1),
            linalg::zeros(1, 1),
            linalg::real_diag(&[lambda]),
        )
    }

    /// `a0 = mu sigma_z + g sigma_x`, `a1 = 0`.
    pub fn two_band(mu: f64, g: f64, b: CMat, mass: f64) -> Result<Self> {
        if mu == 0.0 && g == 0.0 {
            return Err(Error::InvalidModel("(mu, g) = (0, 0) closes the gap".into()));
        }
        let mut a0 = linalg::scaled(&pauli::sigma_z(), cr(mu));
        linalg::add_scaled(&mut a0, &pauli::sigma_x(), cr(g));
        Self::new(mass, a0, linalg::zeros(2, 2), b)
    }

    /// `a0 = mu sigma_z`, `a1 = gamma sigma_y` (spin-orbit coupling linear in p).
    pub fn spin_orbit(gamma: f64, mu: f64, b: CMat, mass: f64) -> Result<Self> {
        Self::new(
            mass,
            linalg::scaled(&pauli::sigma_z(), cr(mu)),
            linalg::scaled(&pauli::sigma_y(), cr(gamma)),
            b,
        )
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn a0(&self) -> &CMat {
        &self.a0
    }

    pub fn a1(&self) -> &CMat {
        &self.a1
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn with_b(&self, b: CMat) -> Result<Self> {
        Self::new(self.mass, self.a0.clone(), self.a1.clone(), b)
    }

    /// True when the real-space Hamiltonian is a real symmetric operator:
    /// `a0` and `b` real, `a1` purely imaginary (so `-i a1 d/dx` is real).
    pub fn is_real(&self) -> bool {
        linalg::is_real(&self.a0) && linalg::is_imaginary(&self.a1) && linalg::is_real(&self.b)
    }

    /// The matrix `E - H0(p)`.
    pub fn resolvent_matrix(&self, energy: f64, p: c64) -> CMat {
        let n = self.n_bands;
        let kinetic = p * p / (2.0 * self.mass);
        Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { cr(energy) - kinetic } else { cr(0.0) };
            diag - self.a0[(i, j)] - self.a1[(i, j)] * p
        })
    }

    /// `d/dp (E - H0(p)) = -a1 - p/m`.
    pub fn resolvent_derivative(&self, p: c64) -> CMat {
        let n = self.n_bands;
        Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { -p / self.mass } else { cr(0.0) };
            diag - self.a1[(i, j)]
        })
    }
}

/// Coefficients (ascending powers of `p`) of `det(E - p^2/(2m) - a0 - a1 p)`.
pub fn dispersion_coeffs(model: &BandModel, energy: f64) -> Vec<c64> {
    let n = model.n_bands;
    let inv2m = 1.0 / (2.0 * model.mass);
    let entries: Vec<Vec<Poly>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c0 = if i == j { cr(energy) } else { cr(0.0) } - model.a0[(i, j)];
                    let c2 = if i == j { cr(-inv2m) } else { cr(0.0) };
                    Poly(vec![c0, -model.a1[(i, j)], c2])
                })
                .collect()
        })
        .collect();
    let mut coeffs = linalg::poly_det(&entries).0;
    coeffs.resize(2 * n + 1, cr(0.0));
    // The leading coefficient is exact by construction.
    coeffs[2 * n] = cr((-inv2m).powi(n as i32));
    coeffs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleLabel {
    Real,
    UpperHalf,
    LowerHalf,
}

#[derive(Debug, Clone)]
pub struct PoleSet {
    pub energy: f64,
    pub roots: Vec<c64>,
    pub labels: Vec<PoleLabel>,
}

impl PoleSet {
    pub fn real(&self) -> Vec<f64> {
        self.iter_labeled(PoleLabel::Real).map(|p| p.re).collect()
    }

    /// Distinct non-negative real pole magnitudes, ascending.
    pub fn real_momenta(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.real().into_iter().map(f64::abs).collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
        out
    }

    pub fn upper(&self) -> Vec<c64> {
        self.iter_labeled(PoleLabel::UpperHalf).collect()
    }

    pub fn lower(&self) -> Vec<c64> {
        self.iter_labeled(PoleLabel::LowerHalf).collect()
    }

    fn iter_labeled(&self, label: PoleLabel) -> impl Iterator<Item = c64> + '_ {
        self.roots
            .iter()
            .zip(&self.labels)
            .filter(move |(_, l)| **l == label)
            .map(|(p, _)| *p)
    }

    pub fn count(&self, label: PoleLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Smallest distance between two roots.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.roots.len() {
            for j in i + 1..self.roots.len() {
                best = best.min((self.roots[i] - self.roots[j]).norm());
            }
        }
        best
    }
}

pub fn label_of(p: c64) -> PoleLabel {
    if p.im.abs() < REAL_TOL * (1.0 + p.re.abs()) {
        PoleLabel::Real
    } else if p.im > 0.0 {
        PoleLabel::UpperHalf
    } else {
        PoleLabel::LowerHalf
    }
}

fn cmp_tol(a: f64, b: f64, scale: f64) -> Ordering {
    if (a - b).abs() <= 1e-9 * scale {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// All `2 n_bands` momentum poles at energy `E`, via the companion matrix of
/// the dispersion polynomial, Newton-polished and sorted by `(|Im|, Re, Im)`.
pub fn poles(model: &BandModel, energy: f64) -> Result<PoleSet> {
    let coeffs = dispersion_coeffs(model, energy);
    let degree = coeffs.len() - 1;
    let lead = coeffs[degree];
    if !(lead.norm() > 1e-300) || !lead.re.is_finite() {
        return Err(Error::DegeneratePolynomial(lead.norm()));
    }
    let companion = Mat::<c64>::from_fn(degree, degree, |i, j| {
        if j == degree - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            cr(1.0)
        } else {
            cr(0.0)
        }
    });
    let eig = companion
        .eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;

    let poly = Poly(coeffs);
    let mut roots: Vec<c64> = eig
        .into_iter()
        .map(|z| polish(&poly, z))
        .map(|z| {
            let mut z = z;
            if label_of(z) == PoleLabel::Real {
                z.im = 0.0;
            } else if z.re.abs() < 1e-13 * (1.0 + z.im.abs()) {
                z.re = 0.0;
            }
            z
        })
        .collect();
    roots.sort_by(|a, b| {
        let scale = 1.0 + a.norm().max(b.norm());
        cmp_tol(a.im.abs(), b.im.abs(), scale)
            .then(cmp_tol(a.re, b.re, scale))
            .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
    });
    let labels = roots.iter().map(|&p| label_of(p)).collect();
    Ok(PoleSet { energy, roots, labels })
}

fn polish(poly: &Poly, mut z: c64) -> c64 {
    let mut fz = poly.eval(z).norm();
    for _ in 0..4 {
        let d = poly.eval_derivative(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly.eval(z) / d;
        let candidate = z - step;
        let fc = poly.eval(candidate).norm();
        if fc < fz {
            z = candidate;
            fz = fc;
        } else {
            break;
        }
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    AllReal,
    Mixed,
    AllComplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRegion {
    pub tag: RegionTag,
    /// Band-edge window `(lo, hi)` for momentum-independent couplings:
    /// the extreme eigenvalues of `a0`, i.e. `(-s, s)` for the two-band model.
    pub gap: Option<(f64, f64)>,
}

pub fn classify_region(model: &BandModel, energy: f64) -> Result<EnergyRegion> {
    let set = poles(model, energy)?;
    let n_real = set.count(PoleLabel::Real);
    let tag = if n_real == set.roots.len() {
        RegionTag::AllReal
    } else if n_real == 0 {
        RegionTag::AllComplex
    } else {
        RegionTag::Mixed
    };
    let gap = if linalg::is_zero(model.a1()) && model.n_bands() > 1 {
        let ev = linalg::hermitian_eigenvalues(model.a0())?;
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        (lo < hi).then_some((lo, hi))
    } else {
        None
    };
    Ok(EnergyRegion { tag, gap })
}

/// Bounds of the mixed-pole interval containing `inside`, located by
/// bisection on the region tag to `1e-12` absolute.
pub fn mixed_region_bounds(model: &BandModel, inside: f64) -> Result<(f64, f64)> {
    let is_mixed = |e: f64| -> Result<bool> { Ok(classify_region(model, e)?.tag == RegionTag::Mixed) };
    if !is_mixed(inside)? {
        return Err(Error::OutsideMixedRegion(inside));
    }
    let mut edges = [0.0; 2];
    for (k, dir) in [-1.0f64, 1.0].into_iter().enumerate() {
        let mut step = 1e-3;
        let mut good = inside;
        let mut bad = None;
        for _ in 0..80 {
            let trial = inside + dir * step;
            if is_mixed(trial)? {
                good = trial;
                step *= 2.0;
            } else {
                bad = Some(trial);
                break;
            }
        }
        let Some(mut bad) = bad else {
            edges[k] = dir * f64::INFINITY;
            continue;
        };
        while (bad - good).abs() > 1e-12 * (1.0 + good.abs()) {
            let mid = 0.5 * (good + bad);
            if is_mixed(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        edges[k] = good;
    }
    Ok((edges[0], edges[1]))
}

/// Closed-form pole branches of the spin-orbit model,
/// `p = sqrt(2m) sqrt(E + gamma^2 m +/- sqrt(2 E m gamma^2 + m^2 gamma^4 + mu^2))`.
pub fn soc_poles(gamma: f64, mu: f64, mass: f64, energy: f64) -> Result<(c64, c64)> {
    let radicand = 2.0 * energy * mass * gamma * gamma + mass * mass * gamma.powi(4) + mu * mu;
    if radicand < 0.0 {
        return Err(Error::ComplexInnerRoot(radicand));
    }
    let inner = radicand.sqrt();
    let base = energy + gamma * gamma * mass;
    let pref = (2.0 * mass).sqrt();
    let plus = cr(base + inner).sqrt() * pref;
    let minus = cr(base - inner).sqrt() * pref;
    Ok((plus, minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_band(mu: f64, g: f64) -> BandModel {
        BandModel::two_band(mu, g, linalg::real_diag(&[-1.0, 0.0]), 1.0).unwrap()
    }

    fn soc(gamma: f64, mu: f64) -> BandModel {
        BandModel::spin_orbit(gamma, mu, linalg::real_diag(&[1.0, 0.0]), 1.0).unwrap()
    }

    #[test]
    fn coeffs_two_band_decoupled() {
        let c = dispersion_coeffs(&two_band(1.0, 0.0), 0.0);
        let expect = [-1.0, 0.0, 0.0, 0.0, 0.25];
        for (a, b) in c.iter().zip(expect) {
            assert_abs_diff_eq!(a.re, b, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn coeffs_two_band_coupled() {
        let c = dispersion_coeffs(&two_band(1.0, 0.5), 0.0);
        assert_abs_diff_eq!(c[0].re, -1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c[4].re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c[2].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coeffs_single_band() {
        let m = BandModel::single_band(1.0, -1.0).unwrap();
        let c = dispersion_coeffs(&m, -0.5);
        assert_eq!(c, vec![cr(-0.5), cr(0.0), cr(-0.5)]);
    }

    #[test]
    fn poles_two_band_gap_center() {
        let set = poles(&two_band(1.0, 0.0), 0.0).unwrap();
        let r2 = 2f64.sqrt();
        assert_eq!(set.count(PoleLabel::Real), 2);
        assert_abs_diff_eq!(set.real()[0], -r2, epsilon = 1e-12);
        assert_abs_diff_eq!(set.real()[1], r2, epsilon = 1e-12);
        assert_abs_diff_eq!(set.upper()[0].im, r2, epsilon = 1e-12);
        assert_abs_diff_eq!(set.lower()[0].im, -r2, epsilon = 1e-12);
    }

    #[test]
    fn poles_single_band_bound() {
        let m = BandModel::single_band(1.0, -1.0).unwrap();
        let set = poles(&m, -0.5).unwrap();
        assert_eq!(set.upper().len(), 1);
        assert_abs_diff_eq!(set.upper()[0].im, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(set.upper()[0].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn soc_poles_fig3_point() {
        let e = -0.49 / 2.0 + (1.0f64 - 0.49 * 0.25).sqrt();
        let (p, q) = soc_poles(0.5, 1.0, 1.0, e).unwrap();
        assert_abs_diff_eq!(p.re, 2.0632496, epsilon = 5e-8);
        assert_abs_diff_eq!(q.im, 0.7, epsilon = 1e-12);
        let set = poles(&soc(0.5, 1.0), e).unwrap();
        let real = set.real();
        assert!((real[1] - p.re).abs() < 1e-10 * p.re);
        assert!((set.upper()[0].im - q.im).abs() < 1e-10);
    }

    #[test]
    fn soc_poles_reduce_to_constant_coupling() {
        let (p, q) = soc_poles(0.0, 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(p.re, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(q.im, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn soc_poles_complex_inner_root() {
        match soc_poles(0.5, 1.0, 1.0, -3.0) {
            Err(Error::ComplexInnerRoot(r)) => assert_abs_diff_eq!(r, -0.4375, epsilon = 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn regions_of_two_band_model() {
        let m = two_band(1.0, 0.0);
        assert_eq!(classify_region(&m, 2.0).unwrap().tag, RegionTag::AllReal);
        assert_eq!(classify_region(&m, -2.0).unwrap().tag, RegionTag::AllComplex);
        let r = classify_region(&m, 0.0).unwrap();
        assert_eq!(r.tag, RegionTag::Mixed);
        let (lo, hi) = r.gap.unwrap();
        assert_abs_diff_eq!(lo, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn region_monotone_sweep() {
        let m = two_band(0.6, 0.8); // s = 1
        let mut seen = vec![];
        for k in 0..=400 {
            let e = -2.0 + 4.0 * k as f64 / 400.0;
            if (e.abs() - 1.0).abs() < 1e-9 {
                continue;
            }
            let tag = classify_region(&m, e).unwrap().tag;
            if seen.last() != Some(&tag) {
                seen.push(tag);
            }
        }
        assert_eq!(seen, vec![RegionTag::AllComplex, RegionTag::Mixed, RegionTag::AllReal]);
        let (lo, hi) = mixed_region_bounds(&m, 0.0).unwrap();
        assert_abs_diff_eq!(lo, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn non_hermitian_rejected() {
        let bad = linalg::from_rows(&[&[cr(0.0), cr(1.0)], &[cr(2.0), cr(0.0)]]);
        assert!(BandModel::new(1.0, bad, linalg::zeros(2, 2), linalg::zeros(2, 2)).is_err());
        assert!(BandModel::two_band(0.0, 0.0, linalg::zeros(2, 2), 1.0).is_err());
        assert!(BandModel::single_band(-1.0, 1.0).is_err());
    }

    fn random_hermitian(vals: &[f64], n: usize) -> CMat {
        let mut k = 0;
        let mut m = linalg::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cr(vals[k]);
            k += 1;
            for j in 0..i {
                let z = c64::new(vals[k], vals[k + 1]);
                k += 2;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    proptest! {
        #[test]
        fn root_residual_and_closure(
            n in 1usize..4,
            vals in proptest::collection::vec(-2.0f64..2.0, 9),
            gamma in -1.0f64..1.0,
            energy in -3.0f64..3.0,
            mass in 0.3f64..3.0,
            use_soc in any::<bool>(),
        ) {
            let a0 = random_hermitian(&vals, n);
            let a1 = if use_soc && n == 2 {
                linalg::scaled(&pauli::sigma_y(), cr(gamma))
            } else {
                linalg::zeros(n, n)
            };
            let model = BandModel::new(mass, a0, a1, linalg::zeros(n, n)).unwrap();
            let coeffs = dispersion_coeffs(&model, energy);
            let poly = Poly(coeffs.clone());
            let lead = coeffs[2 * n].norm();
            let set = poles(&model, energy).unwrap();
            prop_assert_eq!(set.roots.len(), 2 * n);
            for &p in &set.roots {
                let bound = 1e-9 * lead * p.norm().max(1.0).powi(2 * n as i32);
                prop_assert!(poly.eval(p).norm() < bound, "residual {} at {}", poly.eval(p).norm(), p);
            }
            // real coefficients: closed under conjugation
            for &p in &set.roots {
                let d = set.roots.iter().map(|q| (q - p.conj()).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < 1e-6 * (1.0 + p.norm()), "no conjugate for {}", p);
            }
            // even dispersion (a1 = 0, or sigma_y coupling with a real a0): closed under p -> -p
            if !use_soc || n != 2 || linalg::is_real(model.a0()) {
                for &p in &set.roots {
                    let d = set.roots.iter().map(|q| (q + p).norm()).fold(f64::INFINITY, f64::min);
                    prop_assert!(d < 1e-6 * (1.0 + p.norm()), "no partner for {}", p);
                }
            }
        }

        #[test]
        fn soc_branches_agree(gamma in 0.05f64..1.0, mu in 0.2f64..2.0, e_frac in -0.95f64..0.95) {
            let energy = e_frac * mu;
            let model = soc(gamma, mu);
            let (pp, pm) = soc_poles(gamma, mu, 1.0, energy).unwrap();
            let set = poles(&model, energy).unwrap();
            for target in [pp, pm] {
                let d = set.roots.iter().map(|q| (q - target).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < 1e-10 * target.norm().max(1.0), "{} vs {:?}", target, set.roots);
            }
        }
    }
}
