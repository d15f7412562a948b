//! Closed-form states of delta-function couplings.
//!
//! Wave functions are sums of even terms `c e^{-kappa |x|}` (localized) and
//! `c sin(p |x|)` (extended), so the derivative jump at the origin is known
//! exactly and the matching condition `-(psi'(0+) - psi'(0-))/(2m) + B psi(0) = 0`
//! can be checked without discretization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SpinorField};
use crate::linalg::{self, c64, cr, CMat};

/// `c e^{-kappa |x|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evanescent {
    pub kappa: f64,
    pub spinor: Vec<c64>,
    pub amp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSolution {
    pub e_b: f64,
    pub mass: f64,
    /// Momentum of the `sin(p|x|)` component, 0 when absent.
    pub p_real: f64,
    pub kappa: f64,
    pub spinor_loc: Vec<c64>,
    pub spinor_ext: Vec<c64>,
    pub amp_loc: f64,
    pub amp_ext: f64,
    /// Second decaying component of a conventional two-band bound state.
    pub partner: Option<Evanescent>,
}

impl DeltaSolution {
    pub fn n_channels(&self) -> usize {
        self.spinor_loc.len()
    }

    pub fn eval(&self, x: f64) -> Vec<c64> {
        let ax = x.abs();
        let loc = self.amp_loc * (-self.kappa * ax).exp();
        let ext = if self.p_real > 0.0 { self.amp_ext * (self.p_real * ax).sin() } else { 0.0 };
        let mut out: Vec<c64> = self
            .spinor_loc
            .iter()
            .zip(&self.spinor_ext)
            .map(|(l, e)| l * loc + e * ext)
            .collect();
        if let Some(p) = &self.partner {
            let f = p.amp * (-p.kappa * ax).exp();
            for (o, s) in out.iter_mut().zip(&p.spinor) {
                *o += s * f;
            }
        }
        out
    }

    pub fn sample(&self, grid: &Grid) -> Result<SpinorField> {
        SpinorField::from_fn(*grid, self.n_channels(), |x| self.eval(x))
    }

    /// `psi(0)`.
    pub fn value_at_origin(&self) -> Vec<c64> {
        self.eval(0.0)
    }

    /// `psi'(0+) - psi'(0-)`.
    pub fn derivative_jump(&self) -> Vec<c64> {
        let mut out: Vec<c64> = self
            .spinor_loc
            .iter()
            .zip(&self.spinor_ext)
            .map(|(l, e)| {
                l * (-2.0 * self.kappa * self.amp_loc) + e * (2.0 * self.p_real * self.amp_ext)
            })
            .collect();
        if let Some(p) = &self.partner {
            for (o, s) in out.iter_mut().zip(&p.spinor) {
                *o += s * (-2.0 * p.kappa * p.amp);
            }
        }
        out
    }
}

pub fn single_band_bound(lambda: f64, mass: f64) -> Result<DeltaSolution> {
    if !(mass > 0.0) {
        return Err(Error::InvalidModel(format!("mass must be positive, got {mass}")));
    }
    if !(lambda < 0.0) {
        return Err(Error::NoBoundState("no bound state for repulsive delta".into()));
    }
    let kappa = mass * lambda.abs();
    Ok(DeltaSolution {
        e_b: -lambda * lambda * mass / 2.0,
        mass,
        p_real: 0.0,
        kappa,
        spinor_loc: vec![cr(1.0)],
        spinor_ext: vec![cr(0.0)],
        amp_loc: 1.0,
        amp_ext: 0.0,
        partner: None,
    })
}

/// Standing-wave free propagator `(m/p0) sin(p0 x) sign(x)`, `p0 = sqrt(2 m E)`.
pub fn extended_green_1d(energy: f64, mass: f64, x: f64) -> f64 {
    let p0 = (2.0 * mass * energy).sqrt();
    mass / p0 * (p0 * x).sin() * sign(x)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn gap(mu: f64, g: f64) -> Result<f64> {
    if mu == 0.0 && g == 0.0 {
        return Err(Error::InvalidModel("(mu, g) = (0, 0) closes the gap".into()));
    }
    Ok(mu.hypot(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBandEnergy {
    pub e_b: f64,
    pub in_gap: bool,
}

/// `E_b = -(lambda^2 m / 8)(1 + mu/s)^2 + s`.
pub fn two_band_bound_energy(mu: f64, g: f64, lambda: f64, mass: f64) -> Result<TwoBandEnergy> {
    let s = gap(mu, g)?;
    let r = 1.0 + mu / s;
    let e_b = -(lambda * lambda * mass / 8.0) * r * r + s;
    Ok(TwoBandEnergy { e_b, in_gap: e_b.abs() < s })
}

/// `lambda_c = -4 s^{3/2} / (sqrt(m) (s + mu))`; `-inf` when the upper band decouples.
pub fn lambda_critical(mu: f64, g: f64, mass: f64) -> Result<f64> {
    let s = gap(mu, g)?;
    if s + mu == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-4.0 * s.powf(1.5) / (mass.sqrt() * (s + mu)))
}

/// Eigenvectors of `mu sigma_z + g sigma_x` for `+s` and `-s`, in the
/// unnormalized form `(mu + s, g)` and `(mu - s, g)`; degenerate cases at
/// `g = 0` fall back to unit vectors.
pub fn two_band_spinors(mu: f64, g: f64) -> Result<(Vec<c64>, Vec<c64>)> {
    let s = gap(mu, g)?;
    let mut up = vec![cr(mu + s), cr(g)];
    let mut down = vec![cr(mu - s), cr(g)];
    let tiny = 1e-14 * s;
    if linalg::norm(&up) <= tiny {
        up = vec![cr(0.0), cr(1.0)];
    }
    if linalg::norm(&down) <= tiny {
        down = vec![cr(0.0), cr(1.0)];
    }
    Ok((up, down))
}

fn two_band_b(lambda: f64) -> CMat {
    linalg::real_diag(&[lambda, 0.0])
}

/// Mixed localized-plus-standing-wave state for `B = diag(lambda, 0)` in the window `lambda_c < lambda < 0`;
/// below `lambda_c` the conventional bound state below the lower band edge.
pub fn two_band_solution(mu: f64, g: f64, lambda: f64, mass: f64) -> Result<DeltaSolution> {
    if !(lambda < 0.0) {
        return Err(Error::NoBoundState("no bound state for repulsive delta".into()));
    }
    let s = gap(mu, g)?;
    let lc = lambda_critical(mu, g, mass)?;
    if lambda > lc {
        let kappa = mass * lambda.abs() * (1.0 + mu / s) / 2.0;
        if !(kappa > 0.0) {
            return Err(Error::NoBoundState("coupling does not reach the localized band".into()));
        }
        let e_b = s - kappa * kappa / (2.0 * mass);
        let (up, down) = two_band_spinors(mu, g)?;
        let p_real = (2.0 * mass * (e_b + s)).sqrt();
        // amp_loc = 1; amp_ext from projecting the matching condition on the extended spinor
        let b = two_band_b(lambda);
        let coupling = linalg::dot(&down, &linalg::mat_vec(&b, &up)).re;
        let amp_ext = mass * coupling / (p_real * linalg::norm(&down).powi(2));
        let (amp_loc, amp_ext) = if amp_ext != 0.0 { (1.0 / amp_ext, 1.0) } else { (1.0, 0.0) };
        Ok(DeltaSolution {
            e_b,
            mass,
            p_real,
            kappa,
            spinor_loc: up,
            spinor_ext: down,
            amp_loc,
            amp_ext,
            partner: None,
        })
    } else {
        conventional_two_band(mu, g, lambda, mass)
    }
}

/// Two-exponential bound state below `-s`:
/// `1 = -lambda m [P+_11/kappa+ + P-_11/kappa-]`, `kappa± = sqrt(2m(±s - E))`.
pub fn conventional_two_band(mu: f64, g: f64, lambda: f64, mass: f64) -> Result<DeltaSolution> {
    if !(lambda < 0.0) {
        return Err(Error::NoBoundState("no bound state for repulsive delta".into()));
    }
    let s = gap(mu, g)?;
    let w_up = (1.0 + mu / s) / 2.0;
    let w_down = (1.0 - mu / s) / 2.0;
    let kappas = |e: f64| ((2.0 * mass * (s - e)).sqrt(), (2.0 * mass * (-s - e)).sqrt());
    let f = |e: f64| {
        let (kp, km) = kappas(e);
        let down = if w_down == 0.0 { 0.0 } else { w_down / km };
        -lambda * mass * (w_up / kp + down) - 1.0
    };
    // f decreases monotonically from its value at -s to -1 at -inf.
    let mut hi = -s;
    if w_down == 0.0 && f(hi) <= 0.0 {
        return Err(Error::NoBoundState("no bound state below the lower band edge".into()));
    }
    let mut lo = -s - 1.0;
    while f(lo) > 0.0 {
        lo = -s - 2.0 * (-s - lo);
        if !lo.is_finite() {
            return Err(Error::NoConvergence("bound-state bracket".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let e_b = if f(hi).abs() < f(lo).abs() && hi < -s { hi } else { lo };
    let (kp, km) = kappas(e_b);
    let (up, down) = two_band_spinors(mu, g)?;
    let amp_up = -lambda * mass * up[0].re / (kp * linalg::norm(&up).powi(2));
    let amp_down = -lambda * mass * down[0].re / (km * linalg::norm(&down).powi(2));
    Ok(DeltaSolution {
        e_b,
        mass,
        p_real: 0.0,
        kappa: kp,
        spinor_loc: up,
        spinor_ext: vec![cr(0.0), cr(0.0)],
        amp_loc: amp_up,
        amp_ext: 0.0,
        partner: Some(Evanescent { kappa: km, spinor: down, amp: amp_down }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralB {
    pub kappa: f64,
    /// Signed localized-component expression `2 b2 g + b3 (s - mu) + b1 (s + mu)` is negative.
    pub net_attractive: bool,
    pub e_b: f64,
    /// Amplitude ratio `a/b` from the projected matching condition.
    pub ratio: f64,
    /// The closed-form ratio `p (s - mu) / (b2 g m + (b1 m - kappa) s)`.
    pub closed_form_ratio: f64,
}

fn real_symmetric_entries(b: &CMat) -> Result<(f64, f64, f64)> {
    if b.nrows() != 2 || b.ncols() != 2 {
        return Err(Error::InvalidModel("B must be 2x2".into()));
    }
    if !linalg::is_real(b) || (b[(0, 1)].re - b[(1, 0)].re).abs() > 1e-12 * linalg::max_abs(b).max(1.0) {
        return Err(Error::InvalidModel("B must be real symmetric".into()));
    }
    Ok((b[(0, 0)].re, b[(0, 1)].re, b[(1, 1)].re))
}

pub fn general_b_kappa(b: &CMat, mu: f64, g: f64, mass: f64) -> Result<GeneralB> {
    let s = gap(mu, g)?;
    let (b1, b2, b3) = real_symmetric_entries(b)?;
    let expr = 2.0 * b2 * g + b3 * (s - mu) + b1 * (s + mu);
    let scale = b1.abs().max(b2.abs()).max(b3.abs()) * s;
    if expr == 0.0 || expr.abs() <= 1e-14 * scale {
        return Err(Error::ZeroExpression);
    }
    let kappa = mass * expr.abs() / (2.0 * s);
    let e_b = s - kappa * kappa / (2.0 * mass);
    let p = (2.0 * mass * (e_b + s)).max(0.0).sqrt();
    let (up, down) = two_band_spinors(mu, g)?;
    let coupling = linalg::dot(&down, &linalg::mat_vec(b, &up)).re;
    let ratio = p * linalg::norm(&down).powi(2) / (mass * coupling);
    let closed_form_ratio = p * (s - mu) / (b2 * g * mass + (b1 * mass - kappa) * s);
    Ok(GeneralB { kappa, net_attractive: expr < 0.0, e_b, ratio, closed_form_ratio })
}

/// Mixed localized-plus-standing-wave state for a general real-symmetric `B`, energy inside the gap.
pub fn general_b_solution(b: &CMat, mu: f64, g: f64, mass: f64) -> Result<DeltaSolution> {
    let s = gap(mu, g)?;
    let gb = general_b_kappa(b, mu, g, mass)?;
    if !gb.net_attractive {
        return Err(Error::NoBoundState("net repulsive coupling in the localized band".into()));
    }
    if !(gb.e_b > -s) {
        return Err(Error::GapViolation { energy: gb.e_b, lo: -s, hi: s });
    }
    let (up, down) = two_band_spinors(mu, g)?;
    let p_real = (2.0 * mass * (gb.e_b + s)).sqrt();
    let coupling = linalg::dot(&down, &linalg::mat_vec(b, &up)).re;
    let amp_ext = mass * coupling / (p_real * linalg::norm(&down).powi(2));
    Ok(DeltaSolution {
        e_b: gb.e_b,
        mass,
        p_real,
        kappa: gb.kappa,
        spinor_loc: up,
        spinor_ext: down,
        amp_loc: 1.0,
        amp_ext,
        partner: None,
    })
}

/// `-(psi'(0+) - psi'(0-))/(2m) + B psi(0)`.
pub fn boundary_residual(solution: &DeltaSolution, b: &CMat) -> Vec<c64> {
    let jump = solution.derivative_jump();
    let b_psi = linalg::mat_vec(b, &solution.value_at_origin());
    jump.iter()
        .zip(&b_psi)
        .map(|(j, bp)| -j / (2.0 * solution.mass) + bp)
        .collect()
}

/// Residual norm divided by the larger of `|B psi(0)|` and `|jump|/2m`.
pub fn boundary_residual_rel(solution: &DeltaSolution, b: &CMat) -> f64 {
    let r = linalg::norm(&boundary_residual(solution, b));
    let b_psi = linalg::norm(&linalg::mat_vec(b, &solution.value_at_origin()));
    let jump = linalg::norm(&solution.derivative_jump()) / (2.0 * solution.mass);
    let scale = b_psi.max(jump);
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// Bare extended mode `psi_ext sin(p|x|)` at the quasi-bound energy.
pub fn bare_extended_mode(solution: &DeltaSolution) -> DeltaSolution {
    DeltaSolution {
        amp_loc: 0.0,
        amp_ext: 1.0,
        partner: None,
        ..solution.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn diag_b(l: f64) -> CMat {
        two_band_b(l)
    }

    #[test]
    fn single_band_examples() {
        let s = single_band_bound(-1.0, 1.0).unwrap();
        assert_eq!((s.e_b, s.kappa), (-0.5, 1.0));
        let s = single_band_bound(-2.0, 0.5).unwrap();
        assert_eq!((s.e_b, s.kappa), (-1.0, 1.0));
        assert!(matches!(single_band_bound(1.0, 1.0), Err(Error::NoBoundState(_))));
        let s = single_band_bound(-1.0, 1.0).unwrap();
        let r = boundary_residual(&s, &linalg::real_diag(&[-1.0]));
        assert!(linalg::norm(&r) < 1e-12);
        assert_abs_diff_eq!(s.eval(2.0)[0].re, (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn extended_green_examples() {
        assert_abs_diff_eq!(extended_green_1d(0.5, 1.0, std::f64::consts::FRAC_PI_2), 1.0, epsilon = 1e-15);
        assert_eq!(extended_green_1d(0.5, 1.0, 0.0), 0.0);
        assert_abs_diff_eq!(extended_green_1d(2.0, 1.0, -std::f64::consts::FRAC_PI_4), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_band_energy_examples() {
        let e = two_band_bound_energy(0.3, 0.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(e.e_b, -0.2, epsilon = 1e-15);
        let e = two_band_bound_energy(0.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(e.e_b, 0.875);
        assert!(e.in_gap);
        let e = two_band_bound_energy(0.4, 0.7, -1e-9, 1.0).unwrap();
        assert_abs_diff_eq!(e.e_b, 0.4f64.hypot(0.7), epsilon = 1e-15);
    }

    #[test]
    fn lambda_critical_examples() {
        assert_eq!(lambda_critical(0.0, 1.0, 1.0).unwrap(), -4.0);
        assert_eq!(lambda_critical(1.0, 0.0, 1.0).unwrap(), -2.0);
        assert_eq!(lambda_critical(0.0, 4.0, 1.0).unwrap(), -8.0);
        assert_eq!(lambda_critical(-1.0, 0.0, 1.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn quasi_bic_solution() {
        let sol = two_band_solution(0.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(sol.kappa, 0.5);
        assert_eq!(sol.e_b, 0.875);
        assert_abs_diff_eq!(sol.p_real, 3.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(sol.amp_loc / sol.amp_ext, 3.87298, epsilon = 5e-6);
        assert!(boundary_residual_rel(&sol, &diag_b(-1.0)) < 1e-10);
        let bare = bare_extended_mode(&sol);
        assert!(linalg::norm(&boundary_residual(&bare, &diag_b(-1.0))) > 1e-3);
    }

    #[test]
    fn decoupled_limit() {
        let sol = two_band_solution(1.0, 1e-8, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(sol.kappa, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.e_b, 0.5, epsilon = 1e-12);
        let exact = two_band_solution(1.0, 0.0, -1.0, 1.0).unwrap();
        assert_eq!(exact.amp_ext, 0.0);
        assert!(boundary_residual_rel(&exact, &diag_b(-1.0)) < 1e-12);
    }

    #[test]
    fn below_critical_is_conventional() {
        let sol = two_band_solution(0.0, 1.0, -5.0, 1.0).unwrap();
        assert_eq!(sol.amp_ext, 0.0);
        assert!(sol.e_b < -1.0);
        assert!(boundary_residual_rel(&sol, &diag_b(-5.0)) < 1e-10);
        assert_abs_diff_eq!(two_band_bound_energy(0.0, 1.0, -5.0, 1.0).unwrap().e_b, -2.125);
    }

    #[test]
    fn general_b_examples() {
        let gb = general_b_kappa(&linalg::real_diag(&[-1.0, -1.0]), 0.0, 1.0, 1.0).unwrap();
        assert_eq!(gb.kappa, 1.0);
        assert_eq!(gb.e_b, 0.5);
        assert!(gb.net_attractive);
        assert_eq!(general_b_kappa(&linalg::zeros(2, 2), 0.0, 1.0, 1.0), Err(Error::ZeroExpression));
        let sol = general_b_solution(&linalg::real_diag(&[-1.0, -1.0]), 0.0, 1.0, 1.0).unwrap();
        assert!(boundary_residual_rel(&sol, &linalg::real_diag(&[-1.0, -1.0])) < 1e-12);
        // b1 = b3: B commutes with sigma_x here, no extended admixture
        assert_abs_diff_eq!(sol.amp_ext, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gap_membership_sweep() {
        let (mu, g, m) = (0.3f64, 0.8, 1.0);
        let s = mu.hypot(g);
        let lc = lambda_critical(mu, g, m).unwrap();
        for k in 1..=50 {
            let lambda = 2.0 * lc * k as f64 / 50.0;
            let e = two_band_bound_energy(mu, g, lambda, m).unwrap().e_b;
            if lambda > lc {
                assert!(e > -s && e < s, "lambda {lambda} e {e}");
            } else if lambda < lc {
                assert!(e < -s);
            }
        }
    }

    /// Apply the free two-band Hamiltonian by finite differences away from 0.
    #[test]
    fn sampled_state_is_eigenvector_away_from_origin() {
        let (mu, g, lambda, m) = (0.2, 0.9, -1.3, 1.0);
        let sol = two_band_solution(mu, g, lambda, m).unwrap();
        let a0 = {
            let mut a = linalg::scaled(&linalg::pauli::sigma_z(), cr(mu));
            linalg::add_scaled(&mut a, &linalg::pauli::sigma_x(), cr(g));
            a
        };
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3] {
            let mut worst = 0.0f64;
            for &x in &[0.7, 1.9, -2.4] {
                let (f0, fp, fm) = (sol.eval(x), sol.eval(x + h), sol.eval(x - h));
                let a0f = linalg::mat_vec(&a0, &f0);
                for c in 0..2 {
                    let lap = (fp[c] - f0[c] * 2.0 + fm[c]) / (h * h);
                    let hpsi = -lap / (2.0 * m) + a0f[c];
                    worst = worst.max((hpsi - f0[c] * sol.e_b).norm() / linalg::norm(&f0));
                }
            }
            assert!(worst < 1e-3);
            assert!(worst < prev / 3.0);
            prev = worst;
        }
    }

    proptest! {
        #[test]
        fn closed_forms_consistent(mu in -2.0f64..2.0, g in 0.05f64..2.0, frac in 0.02f64..0.98, m in 0.3f64..3.0) {
            let s = mu.hypot(g);
            let lc = lambda_critical(mu, g, m).unwrap();
            prop_assert!((two_band_bound_energy(mu, g, lc, m).unwrap().e_b + s).abs() < 1e-10 * s.max(1.0));
            let lambda = lc * frac;
            let sol = two_band_solution(mu, g, lambda, m).unwrap();
            let gb = general_b_kappa(&diag_b(lambda), mu, g, m).unwrap();
            prop_assert!((gb.kappa - sol.kappa).abs() < 1e-12 * sol.kappa.max(1.0));
            prop_assert!((sol.e_b - two_band_bound_energy(mu, g, lambda, m).unwrap().e_b).abs() < 1e-10 * s.max(1.0));
            prop_assert!((sol.amp_loc / sol.amp_ext - sol.p_real / sol.kappa).abs() < 1e-12 * (sol.p_real / sol.kappa).max(1.0));
            prop_assert!((gb.ratio - sol.p_real / sol.kappa).abs() < 1e-10 * gb.ratio.abs().max(1.0));
            prop_assert!(boundary_residual_rel(&sol, &diag_b(lambda)) < 1e-10);
            let zero = two_band_bound_energy(mu, 0.0, lambda, m).unwrap().e_b;
            if mu > 0.0 {
                prop_assert!((zero - (mu - lambda * lambda * m / 2.0)).abs() < 1e-12 * (1.0 + zero.abs()));
            }
            // a0 eigenvectors
            let a0 = {
                let mut a = linalg::scaled(&linalg::pauli::sigma_z(), cr(mu));
                linalg::add_scaled(&mut a, &linalg::pauli::sigma_x(), cr(g));
                a
            };
            let up = linalg::mat_vec(&a0, &sol.spinor_loc);
            let dn = linalg::mat_vec(&a0, &sol.spinor_ext);
            for c in 0..2 {
                prop_assert!((up[c] - sol.spinor_loc[c] * s).norm() < 1e-12 * s * linalg::norm(&sol.spinor_loc));
                prop_assert!((dn[c] + sol.spinor_ext[c] * s).norm() < 1e-12 * s * linalg::norm(&sol.spinor_ext));
            }
        }

        #[test]
        fn bare_mode_violates_matching(mu in -2.0f64..2.0, g in 0.05f64..2.0, frac in 0.02f64..0.98) {
            let lc = lambda_critical(mu, g, 1.0).unwrap();
            let lambda = lc * frac;
            prop_assume!(lambda.abs() >= 0.1);
            let sol = two_band_solution(mu, g, lambda, 1.0).unwrap();
            let bare = bare_extended_mode(&sol);
            prop_assert!(linalg::norm(&boundary_residual(&bare, &diag_b(lambda))) >= 1e-3);
        }

        #[test]
        fn general_b_solutions_match(b1 in -2.0f64..0.0, b2 in -0.5f64..0.5, b3 in -2.0f64..0.5, mu in -1.0f64..1.0, g in 0.1f64..1.5) {
            let b = linalg::from_rows(&[&[cr(b1), cr(b2)], &[cr(b2), cr(b3)]]);
            match general_b_solution(&b, mu, g, 1.0) {
                Ok(sol) => prop_assert!(boundary_residual_rel(&sol, &b) < 1e-10),
                Err(Error::NoBoundState(_)) | Err(Error::GapViolation { .. }) | Err(Error::ZeroExpression) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
