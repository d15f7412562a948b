//! Real-space Green's functions `G_E(dx) = (1/2pi) int (E - H0(p))^{-1} e^{i p dx} dp`.
//!
//! Non-real poles are closed in the half plane selected by `sign(dx)`; real
//! poles take the principal value, which yields standing waves. At `dx = 0`
//! the `dx >= 0` branch is used; the full kernel is continuous there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, I};
use crate::spectral::{self, BandModel, PoleLabel, RegionTag};

/// Roots closer than this are treated as a double pole.
pub const DEGENERATE_POLE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMode {
    /// `forward e^{i p dx}` for `dx >= 0`, `backward e^{i conj(p) dx}` for `dx < 0`; `Im p > 0`.
    ExpDecay,
    /// `coeff sin(k |dx|)`.
    StandingSine,
    /// `coeff cos(k dx) sign(dx)`.
    StandingCosineSign,
}

#[derive(Debug, Clone)]
pub struct KernelTerm {
    pub mode: KernelMode,
    pub pole: c64,
    pub coeff: CMat,
    /// Only used by `ExpDecay`.
    pub backward: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

impl Side {
    fn of(dx: f64) -> Side {
        if dx < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub energy: f64,
    pub n: usize,
    pub terms: Vec<KernelTerm>,
}

impl GreenKernel {
    pub fn evaluate(&self, dx: f64) -> CMat {
        self.evaluate_side(dx, Side::of(dx))
    }

    /// One-sided limit at `dx`, selecting the branch explicitly.
    pub fn evaluate_side(&self, dx: f64, side: Side) -> CMat {
        let mut out = linalg::zeros(self.n, self.n);
        let sg = side.sign();
        for t in &self.terms {
            let (mat, f) = match t.mode {
                KernelMode::ExpDecay => match side {
                    Side::Right => (&t.coeff, (I * t.pole * dx).exp()),
                    Side::Left => (&t.backward, (I * t.pole.conj() * dx).exp()),
                },
                KernelMode::StandingSine => (&t.coeff, cr((t.pole.re * dx.abs()).sin())),
                KernelMode::StandingCosineSign => (&t.coeff, cr((t.pole.re * dx).cos() * sg)),
            };
            linalg::add_scaled(&mut out, mat, f);
        }
        out
    }

    pub fn derivative(&self, dx: f64) -> CMat {
        self.derivative_side(dx, Side::of(dx))
    }

    pub fn derivative_side(&self, dx: f64, side: Side) -> CMat {
        let mut out = linalg::zeros(self.n, self.n);
        let sg = side.sign();
        for t in &self.terms {
            let k = t.pole.re;
            let (mat, f) = match t.mode {
                KernelMode::ExpDecay => match side {
                    Side::Right => (&t.coeff, I * t.pole * (I * t.pole * dx).exp()),
                    Side::Left => {
                        let p = t.pole.conj();
                        (&t.backward, I * p * (I * p * dx).exp())
                    }
                },
                KernelMode::StandingSine => (&t.coeff, cr(k * (k * dx.abs()).cos() * sg)),
                KernelMode::StandingCosineSign => (&t.coeff, cr(-k * (k * dx).sin() * sg)),
            };
            linalg::add_scaled(&mut out, mat, f);
        }
        out
    }

    /// `G'(0+) - G'(0-)`.
    pub fn derivative_jump(&self) -> CMat {
        let mut j = self.derivative_side(0.0, Side::Right);
        linalg::add_scaled(&mut j, &self.derivative_side(0.0, Side::Left), cr(-1.0));
        j
    }

    pub fn terms_of(&self, mode: KernelMode) -> impl Iterator<Item = &KernelTerm> {
        self.terms.iter().filter(move |t| t.mode == mode)
    }
}

/// Residue `v u^H / (u^H P'(p) v)` of `P(p)^{-1}`, `P = E - H0`, at a simple root.
fn residue(model: &BandModel, energy: f64, p: c64) -> Result<CMat> {
    let pm = model.resolvent_matrix(energy, p);
    let (u, v, _) = linalg::null_vectors(&pm)?;
    let dp = model.resolvent_derivative(p);
    let denom = linalg::dot(&u, &linalg::mat_vec(&dp, &v));
    if denom.norm() == 0.0 {
        return Err(Error::DegeneratePoles(0.0));
    }
    let n = model.n_bands();
    Ok(faer::Mat::from_fn(n, n, |i, j| v[i] * u[j].conj() / denom))
}

pub fn residue_green(model: &BandModel, energy: f64) -> Result<GreenKernel> {
    let set = spectral::poles(model, energy)?;
    let sep = set.min_separation();
    if sep < DEGENERATE_POLE_TOL * (1.0 + set.roots.iter().map(|p| p.norm()).fold(0.0, f64::max)) {
        return Err(Error::DegeneratePoles(sep));
    }
    let n = model.n_bands();
    let mut terms = Vec::new();
    let lower = set.lower();
    for pu in set.upper() {
        let pl = *lower
            .iter()
            .min_by(|a, b| (**a - pu.conj()).norm().total_cmp(&(**b - pu.conj()).norm()))
            .ok_or_else(|| Error::NoConvergence("unpaired upper-half pole".into()))?;
        let forward = linalg::scaled(&residue(model, energy, pu)?, I);
        let backward = linalg::scaled(&residue(model, energy, pl)?, -I);
        terms.push(KernelTerm { mode: KernelMode::ExpDecay, pole: pu, coeff: forward, backward });
    }
    // Principal value at real poles: (i/2) sign(dx) R e^{i p dx}, merged over +-|p|.
    let mut standing: Vec<(f64, CMat, CMat)> = Vec::new();
    for p in set.real() {
        let r = residue(model, energy, cr(p))?;
        let k = p.abs();
        let idx = match standing.iter().position(|(q, _, _)| (q - k).abs() <= 1e-9 * (1.0 + k)) {
            Some(i) => i,
            None => {
                standing.push((k, linalg::zeros(n, n), linalg::zeros(n, n)));
                standing.len() - 1
            }
        };
        let entry = &mut standing[idx];
        linalg::add_scaled(&mut entry.1, &r, I * 0.5);
        linalg::add_scaled(&mut entry.2, &r, cr(-0.5 * p.signum()));
    }
    for (k, cos_sign, sine) in standing {
        if linalg::max_abs(&cos_sign) > 0.0 {
            terms.push(KernelTerm {
                mode: KernelMode::StandingCosineSign,
                pole: cr(k),
                coeff: cos_sign,
                backward: linalg::zeros(0, 0),
            });
        }
        terms.push(KernelTerm {
            mode: KernelMode::StandingSine,
            pole: cr(k),
            coeff: sine,
            backward: linalg::zeros(0, 0),
        });
    }
    Ok(GreenKernel { energy, n, terms })
}

/// `(mu, g)` of `a0 = mu sigma_z + g sigma_x`.
fn constant_a_params(model: &BandModel) -> Result<(f64, f64)> {
    let a0 = model.a0();
    if model.n_bands() != 2 || !linalg::is_zero(model.a1()) || !linalg::is_real(a0) {
        return Err(Error::InvalidModel("closed-form kernel needs a real two-band a0 and a1 = 0".into()));
    }
    let (mu, g) = (a0[(0, 0)].re, a0[(0, 1)].re);
    if (a0[(1, 1)].re + mu).abs() > 1e-12 * (1.0 + mu.abs()) {
        return Err(Error::InvalidModel("a0 must be traceless".into()));
    }
    Ok((mu, g))
}

/// Closed-form two-band kernel `B1 e^{-kappa|dx|} + B2 sin(p1 |dx|)` with
/// `B1 = a (psi1, c0 psi1)`, `B2 = b (psi2, d0 psi2)`.
pub fn constant_a_kernel(model: &BandModel, energy: f64) -> Result<GreenKernel> {
    let (mu, g) = constant_a_params(model)?;
    let s = mu.hypot(g);
    if !(energy.abs() < s) {
        return Err(Error::GapViolation { energy, lo: -s, hi: s });
    }
    if g == 0.0 {
        return Err(Error::SingularG);
    }
    let m = model.mass();
    let kappa = (2.0 * m * (s - energy)).sqrt();
    let p1 = (2.0 * m * (energy + s)).sqrt();
    let a = -m / (2.0 * s * kappa);
    let b = -m / (2.0 * s * p1);
    let c0 = (-mu + s) / g;
    let d0 = (-mu - s) / g;
    let psi1 = [mu + s, g];
    let psi2 = [mu - s, g];
    let b1 = faer::Mat::from_fn(2, 2, |i, j| cr(a * psi1[i] * if j == 0 { 1.0 } else { c0 }));
    let b2 = faer::Mat::from_fn(2, 2, |i, j| cr(b * psi2[i] * if j == 0 { 1.0 } else { d0 }));
    Ok(GreenKernel {
        energy,
        n: 2,
        terms: vec![
            KernelTerm { mode: KernelMode::ExpDecay, pole: c64::new(0.0, kappa), coeff: b1.clone(), backward: b1 },
            KernelTerm { mode: KernelMode::StandingSine, pole: cr(p1), coeff: b2, backward: linalg::zeros(0, 0) },
        ],
    })
}

/// `(gamma, mu)` of `a0 = mu sigma_z`, `a1 = gamma sigma_y`.
fn soc_params(model: &BandModel) -> Result<(f64, f64)> {
    let (a0, a1) = (model.a0(), model.a1());
    let ok = model.n_bands() == 2
        && linalg::is_real(a0)
        && a0[(0, 1)].norm() == 0.0
        && (a0[(1, 1)].re + a0[(0, 0)].re).abs() <= 1e-12 * (1.0 + a0[(0, 0)].re.abs())
        && linalg::is_imaginary(a1)
        && a1[(0, 0)].norm() == 0.0
        && a1[(1, 1)].norm() == 0.0;
    if !ok {
        return Err(Error::InvalidModel("spin-orbit kernel needs a0 = mu sigma_z, a1 = gamma sigma_y".into()));
    }
    // sigma_y = [[0, -i], [i, 0]]
    Ok((a1[(1, 0)].im, a0[(0, 0)].re))
}

/// Closed-form spin-orbit kernel from partial fractions of
/// `4m^2 (E - p^2/2m + mu sigma_z + gamma p sigma_y) / ((p^2 - p_r^2)(p^2 + kappa^2))`.
pub fn soc_kernel(model: &BandModel, energy: f64) -> Result<GreenKernel> {
    let (gamma, mu) = soc_params(model)?;
    let m = model.mass();
    let region = spectral::classify_region(model, energy)?;
    let (plus, minus) = spectral::soc_poles(gamma, mu, m, energy)?;
    let mixed = region.tag == RegionTag::Mixed
        && spectral::label_of(plus) == PoleLabel::Real
        && minus.re.abs() <= 1e-12 * (1.0 + minus.im.abs());
    if !mixed {
        return Err(Error::GapViolation { energy, lo: -mu.abs(), hi: mu.abs() });
    }
    let (pr, kappa) = (plus.re, minus.im.abs());
    if pr.min(kappa) < DEGENERATE_POLE_TOL {
        return Err(Error::DegeneratePoles(pr.min(kappa)));
    }
    let pref = 4.0 * m * m / (pr * pr + kappa * kappa);
    let sz = linalg::pauli::sigma_z();
    let sy = linalg::pauli::sigma_y();
    let id = linalg::pauli::identity(2);

    let mut sine = linalg::scaled(&id, cr(energy - pr * pr / (2.0 * m)));
    linalg::add_scaled(&mut sine, &sz, cr(mu));
    let sine = linalg::scaled(&sine, cr(-pref / (2.0 * pr)));

    let mut decay = linalg::scaled(&id, cr(energy + kappa * kappa / (2.0 * m)));
    linalg::add_scaled(&mut decay, &sz, cr(mu));
    let decay = linalg::scaled(&decay, cr(-pref / (2.0 * kappa)));

    // (i gamma sigma_y / 2) sign(dx) [cos(p_r dx) - e^{-kappa |dx|}]
    let odd = linalg::scaled(&sy, I * (pref * gamma / 2.0));
    let mut forward = decay.clone();
    linalg::add_scaled(&mut forward, &odd, cr(-1.0));
    let mut backward = decay;
    linalg::add_scaled(&mut backward, &odd, cr(1.0));

    let mut terms = vec![
        KernelTerm { mode: KernelMode::ExpDecay, pole: c64::new(0.0, kappa), coeff: forward, backward },
        KernelTerm { mode: KernelMode::StandingSine, pole: cr(pr), coeff: sine, backward: linalg::zeros(0, 0) },
    ];
    if gamma != 0.0 {
        terms.push(KernelTerm {
            mode: KernelMode::StandingCosineSign,
            pole: cr(pr),
            coeff: odd,
            backward: linalg::zeros(0, 0),
        });
    }
    Ok(GreenKernel { energy, n: 2, terms })
}

/// `|| (E - a0) G + G''/(2m) + i a1 G' || / ||G||` at `dx != 0`, with a
/// 5-point second derivative and central first derivative of step `h`.
pub fn defining_identity_residual(kernel: &GreenKernel, model: &BandModel, dx: f64, h: f64) -> f64 {
    let g = |x: f64| kernel.evaluate(x);
    let (g0, gp, gm, gpp, gmm) = (g(dx), g(dx + h), g(dx - h), g(dx + 2.0 * h), g(dx - 2.0 * h));
    let n = kernel.n;
    let m = model.mass();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let d2 = (-gpp[(i, j)] + gp[(i, j)] * 16.0 - g0[(i, j)] * 30.0 + gm[(i, j)] * 16.0 - gmm[(i, j)])
                / (12.0 * h * h);
            let mut acc = d2 / (2.0 * m) + g0[(i, j)] * kernel.energy;
            for k in 0..n {
                let d1 = (gp[(k, j)] - gm[(k, j)]) / (2.0 * h);
                acc -= model.a0()[(i, k)] * g0[(k, j)];
                acc += I * model.a1()[(i, k)] * d1;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst / linalg::max_abs(&g0)
}

/// Largest elementwise deviation between two kernels over the sample points.
pub fn max_deviation(a: &GreenKernel, b: &GreenKernel, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| linalg::max_abs_diff(&a.evaluate(x), &b.evaluate(x)))
        .fold(0.0, f64::max)
}
