//! Fourier-component criterion for bound states in the continuum.
//!
//! A state solving the self-consistency equation inside the mixed-pole region
//! carries an oscillating tail proportional to `u^H F_p` at every real pole
//! `p`, where `F_q = sum_j e^{-i q x_j} W(x_j) psi(x_j) w_j` and `u` spans the
//! left null space of `E - H0(p)`. The tail vanishes, and the state is an
//! exact BIC, iff all those projections vanish.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delta::DeltaSolution;
use crate::error::{Error, Result};
use crate::grid::SpinorField;
use crate::linalg::{self, c64, cr};
use crate::lippmann::{self, FindOptions, Setup, SolveReport};
use crate::potential::{Coupling, PotentialSpec};
use crate::spectral::{self, BandModel, RegionTag};

/// Largest `q dx` accepted by the Fourier sum.
pub const MAX_FOURIER_STEP: f64 = 0.5;
const PEAK_SAMPLES: usize = 512;
const MIN_PERIODS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "ExactBIC")]
    ExactBic,
    #[serde(rename = "QuasiBIC")]
    QuasiBic,
    ConventionalBound,
    Extended,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ExactBic => "ExactBIC",
            Verdict::QuasiBic => "QuasiBIC",
            Verdict::ConventionalBound => "ConventionalBound",
            Verdict::Extended => "Extended",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Projected Fourier residual relative to `peak_fourier`.
    pub tol_bic: f64,
    /// Tail oscillation amplitude relative to `max |psi|`.
    pub tol_tail: f64,
    /// Relative tail amplitude at which a state counts as extended.
    pub extended_tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tol_bic: 1e-3, tol_tail: 1e-3, extended_tail: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleResidual {
    pub pole: f64,
    /// `F_p` per channel.
    pub fourier: Vec<c64>,
    /// `u^H F_p`.
    pub projected: c64,
    pub residual_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMetrics {
    pub osc_amplitude: f64,
    pub osc_rel: f64,
    pub decay_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicReport {
    pub energy: f64,
    pub region: RegionTag,
    pub real_poles: Vec<f64>,
    pub fourier_residuals: Vec<PoleResidual>,
    pub peak_fourier: f64,
    pub max_residual_rel: f64,
    pub tail_osc_amplitude: f64,
    pub tail_rel: f64,
    pub tail_decay_rate: f64,
    pub verdict: Verdict,
    /// Residual and tail disagree about exactness.
    pub conflict: bool,
}

/// `F_q = sum_j e^{-i q x_j} W(x_j) psi(x_j) w_j`, one value per channel.
pub fn fourier_residual(state: &SpinorField, coupling: &Coupling, q: f64) -> Result<Vec<c64>> {
    let grid = &state.grid;
    let w = coupling.sample(grid)?;
    fourier_sampled(state, &w, q)
}

fn fourier_sampled(state: &SpinorField, w: &[linalg::CMat], q: f64) -> Result<Vec<c64>> {
    let grid = &state.grid;
    if q.abs() * grid.dx > MAX_FOURIER_STEP {
        return Err(Error::GridTooCoarse(q.abs() * grid.dx));
    }
    let nc = state.n_channels;
    let mut out = vec![cr(0.0); nc];
    for (i, wi) in w.iter().enumerate() {
        if linalg::is_zero(wi) {
            continue;
        }
        let phase = c64::from_polar(grid.weight(i), -q * grid.x(i));
        let wpsi = linalg::mat_vec(wi, state.spinor(i));
        for (o, z) in out.iter_mut().zip(wpsi) {
            *o += z * phase;
        }
    }
    Ok(out)
}

/// `max_q ||F_q||` over `q in [0, q_max]`, `q_max = min(4 p_max, 0.5/dx)`.
pub fn peak_fourier(state: &SpinorField, w: &[linalg::CMat], p_max: f64) -> Result<f64> {
    let q_max = (4.0 * p_max).min(MAX_FOURIER_STEP / state.grid.dx);
    let peaks: Vec<f64> = (0..PEAK_SAMPLES)
        .into_par_iter()
        .map(|k| {
            let q = q_max * k as f64 / (PEAK_SAMPLES - 1) as f64;
            fourier_sampled(state, w, q).map(|f| linalg::norm(&f))
        })
        .collect::<Result<_>>()?;
    Ok(peaks.into_iter().fold(0.0, f64::max))
}

/// Least-squares `sin/cos` fit at each momentum over `|x| in [window_start, x_max]`
/// on both sides; amplitude is the max over channels, sides and momenta.
/// The decay rate is the `|psi|^2`-weighted slope of `-ln ||psi(x)||` versus `|x|`.
pub fn tail_metrics(state: &SpinorField, momenta: &[f64], window_start: f64) -> Result<TailMetrics> {
    let grid = &state.grid;
    let x_max = grid.x_max();
    let length = x_max - window_start;
    for &p in momenta {
        let periods = length * p / (2.0 * std::f64::consts::PI);
        if periods < MIN_PERIODS {
            return Err(Error::WindowTooShort(periods));
        }
    }
    let peak = state.max_abs();
    let left: Vec<usize> = (0..grid.n_points).filter(|&i| grid.x(i) <= -window_start).collect();
    let right: Vec<usize> = (0..grid.n_points).filter(|&i| grid.x(i) >= window_start).collect();
    if left.len() < 4 || right.len() < 4 {
        return Err(Error::WindowTooShort(0.0));
    }
    let mut osc = 0.0f64;
    if !momenta.is_empty() {
        for side in [&left, &right] {
            for c in 0..state.n_channels {
                for amp in fit_oscillation(state, side, c, momenta)? {
                    osc = osc.max(amp);
                }
            }
        }
    }
    let decay_rate = envelope_decay(state, &left, &right);
    Ok(TailMetrics {
        osc_amplitude: osc,
        osc_rel: if peak > 0.0 { osc / peak } else { 0.0 },
        decay_rate,
    })
}

fn fit_oscillation(state: &SpinorField, sites: &[usize], c: usize, momenta: &[f64]) -> Result<Vec<f64>> {
    let k = 2 * momenta.len();
    let basis = |x: f64| -> Vec<f64> {
        momenta.iter().flat_map(|&p| [(p * x).sin(), (p * x).cos()]).collect()
    };
    let mut ata = faer::Mat::<f64>::zeros(k, k);
    let mut atb = faer::Mat::<c64>::zeros(k, 1);
    for &i in sites {
        let phi = basis(state.grid.x(i));
        let y = state.at(i, c);
        for a in 0..k {
            for b in 0..k {
                ata[(a, b)] += phi[a] * phi[b];
            }
            atb[(a, 0)] += y * phi[a];
        }
    }
    let ata_c = faer::Mat::<c64>::from_fn(k, k, |a, b| cr(ata[(a, b)]));
    let coef = {
        use faer::prelude::Solve;
        let lu = ata_c.partial_piv_lu();
        let mut x = atb;
        lu.solve_in_place(&mut x);
        x
    };
    Ok((0..momenta.len())
        .map(|m| (coef[(2 * m, 0)].norm_sqr() + coef[(2 * m + 1, 0)].norm_sqr()).sqrt())
        .collect())
}

fn envelope_decay(state: &SpinorField, left: &[usize], right: &[usize]) -> f64 {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in left.iter().chain(right) {
        let a = state.local_norm(i);
        if a <= 0.0 {
            continue;
        }
        let w = a * a;
        let x = state.grid.x(i).abs();
        let y = a.ln();
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let den = sw * sxx - sx * sx;
    if sw == 0.0 || den <= 0.0 {
        return 0.0;
    }
    -(sw * sxy - sx * sy) / den
}

fn verdict_for(region: RegionTag, residual: f64, tail: f64, tol: &Tolerances) -> (Verdict, bool) {
    match region {
        RegionTag::AllComplex => (Verdict::ConventionalBound, false),
        RegionTag::AllReal => (Verdict::Extended, false),
        RegionTag::Mixed => {
            let small_res = residual < tol.tol_bic;
            let small_tail = tail < tol.tol_tail;
            if small_res && small_tail {
                (Verdict::ExactBic, false)
            } else if small_res != small_tail {
                (Verdict::QuasiBic, true)
            } else if tail >= tol.extended_tail {
                (Verdict::Extended, false)
            } else {
                (Verdict::QuasiBic, false)
            }
        }
    }
}

/// Evaluate residuals and tail metrics of `state` at `energy` and apply the verdict rules.
pub fn classify(
    model: &BandModel,
    energy: f64,
    state: &SpinorField,
    coupling: &Coupling,
    tol: &Tolerances,
) -> Result<BicReport> {
    let region = spectral::classify_region(model, energy)?.tag;
    let set = spectral::poles(model, energy)?;
    let real_poles = set.real();
    let w = coupling.sample(&state.grid)?;
    let p_max = real_poles.iter().fold(0.0f64, |a, p| a.max(p.abs()));

    let mut fourier_residuals = Vec::with_capacity(real_poles.len());
    let mut peak = 0.0;
    if !real_poles.is_empty() {
        peak = peak_fourier(state, &w, p_max)?;
        for &p in &real_poles {
            let f = fourier_sampled(state, &w, p)?;
            let (u, _, _) = linalg::null_vectors(&model.resolvent_matrix(energy, cr(p)))?;
            let projected = linalg::dot(&u, &f);
            let residual_rel = if peak > 0.0 { projected.norm() / peak } else { 0.0 };
            fourier_residuals.push(PoleResidual { pole: p, fourier: f, projected, residual_rel });
        }
    }
    let max_residual_rel = fourier_residuals.iter().map(|r| r.residual_rel).fold(0.0, f64::max);

    let momenta = set.real_momenta();
    let window = state.grid.x_max() / 2.0;
    let tail = tail_metrics(state, &momenta, window)?;
    let decay = {
        let quarter = state.grid.x_max() / 4.0;
        let grid = &state.grid;
        let left: Vec<usize> = (0..grid.n_points).filter(|&i| grid.x(i) <= -quarter).collect();
        let right: Vec<usize> = (0..grid.n_points).filter(|&i| grid.x(i) >= quarter).collect();
        envelope_decay(state, &left, &right)
    };
    let (verdict, conflict) = verdict_for(region, max_residual_rel, tail.osc_rel, tol);
    Ok(BicReport {
        energy,
        region,
        real_poles,
        fourier_residuals,
        peak_fourier: peak,
        max_residual_rel,
        tail_osc_amplitude: tail.osc_amplitude,
        tail_rel: tail.osc_rel,
        tail_decay_rate: decay,
        verdict,
        conflict,
    })
}

/// Same verdict logic for `U(x) = diag(V_1, ..., V_N)`.
pub fn multiband_criterion(
    model: &BandModel,
    energy: f64,
    state: &SpinorField,
    potentials: Vec<PotentialSpec>,
    tol: &Tolerances,
) -> Result<BicReport> {
    if model.n_bands() < 2 || potentials.len() != model.n_bands() {
        return Err(Error::InvalidModel("need N >= 2 bands and one potential per channel".into()));
    }
    classify(model, energy, state, &Coupling::diagonal(potentials), tol)
}

/// Verdict of a closed-form delta solution from its energy region and tail content.
pub fn classify_delta(model: &BandModel, solution: &DeltaSolution) -> Result<Verdict> {
    let region = spectral::classify_region(model, solution.e_b)?.tag;
    Ok(match region {
        RegionTag::AllComplex => Verdict::ConventionalBound,
        RegionTag::AllReal => Verdict::Extended,
        RegionTag::Mixed if solution.amp_ext == 0.0 => Verdict::ExactBic,
        RegionTag::Mixed => Verdict::QuasiBic,
    })
}

/// One solver configuration of a parameter family.
pub struct ScanPoint {
    pub setup: Setup,
    pub window: (f64, f64),
    /// Prefer the solution nearest this energy; otherwise the smallest residual.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub param: f64,
    pub energy: Option<f64>,
    pub residual_rel: Option<f64>,
    pub tail_rel: Option<f64>,
    pub verdict: Option<Verdict>,
    /// Local minimum of the residual along the scan.
    pub candidate: bool,
    pub error: Option<String>,
}

/// Solve and classify every parameter value; rows come back in parameter order.
pub fn scan_parameter<F>(family: F, values: &[f64], find: &FindOptions, tol: &Tolerances) -> Vec<ScanRow>
where
    F: Fn(f64) -> Result<ScanPoint> + Sync,
{
    let mut rows: Vec<ScanRow> = values
        .par_iter()
        .map(|&param| match scan_one(&family, param, find, tol) {
            Ok(report) => ScanRow {
                param,
                energy: Some(report.energy),
                residual_rel: Some(report.max_residual_rel),
                tail_rel: Some(report.tail_rel),
                verdict: Some(report.verdict),
                candidate: false,
                error: None,
            },
            Err(e) => ScanRow {
                param,
                energy: None,
                residual_rel: None,
                tail_rel: None,
                verdict: None,
                candidate: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let res: Vec<Option<f64>> = rows.iter().map(|r| r.residual_rel).collect();
    for k in 0..rows.len() {
        let Some(here) = res[k] else { continue };
        let below_prev = k == 0 || res[k - 1].is_none_or(|p| here < p);
        let below_next = k + 1 == rows.len() || res[k + 1].is_none_or(|n| here <= n);
        rows[k].candidate = below_prev && below_next && rows.len() > 1;
    }
    rows
}

fn scan_one<F>(family: &F, param: f64, find: &FindOptions, tol: &Tolerances) -> Result<BicReport>
where
    F: Fn(f64) -> Result<ScanPoint>,
{
    let point = family(param)?;
    let sols = lippmann::find_energy(&point.setup, point.window.0, point.window.1, find)?;
    let mut best: Option<(f64, BicReport)> = None;
    for sol in &sols {
        let report = classify_solution(&point.setup, sol, tol)?;
        let key = match point.target {
            Some(t) => (sol.energy - t).abs(),
            None => report.max_residual_rel,
        };
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, report));
        }
    }
    best.map(|(_, r)| r).ok_or(Error::NoSolutionInRange { lo: point.window.0, hi: point.window.1 })
}

pub fn classify_solution(setup: &Setup, sol: &SolveReport, tol: &Tolerances) -> Result<BicReport> {
    classify(&setup.model, sol.energy, &sol.state, &setup.coupling, tol)
}
