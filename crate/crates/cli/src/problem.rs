//! Resolution of command-line model parameters or a model file into solver inputs.

use std::path::Path;

use bicforge_core::linalg::{self, c64, CMat};
use bicforge_core::lippmann::Setup;
use bicforge_core::potential::e_bic_analytic;
use bicforge_core::{delta, spectral, BandModel, Coupling, Grid, PotentialSpec};
use serde::{Deserialize, Serialize};

use crate::args::{GridArgs, ModelArgs, ModelKind, ScanParam};
use crate::CliError;

/// Model description file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_bands: usize,
    #[serde(default = "unit_mass")]
    pub mass: f64,
    /// Row-major, entries `[re, im]`.
    pub a0: Vec<Vec<[f64; 2]>>,
    pub a1: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub b: Option<Vec<Vec<[f64; 2]>>>,
    /// `V(x) B`; requires `b`.
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// `diag(V_1, ..., V_N)`.
    #[serde(default)]
    pub potentials: Option<Vec<PotentialSpec>>,
    /// Energy used to pick among solutions and to locate the mixed region.
    #[serde(default)]
    pub target: Option<f64>,
}

fn unit_mass() -> f64 {
    1.0
}

fn matrix(rows: &[Vec<[f64; 2]>], n: usize, name: &str) -> Result<CMat, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!("model file: {name} must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c64::new(rows[i][j][0], rows[i][j][1])))
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("model file {}: {e}", path.display())))
    }

    fn resolve(&self, scale: f64) -> Result<(BandModel, Coupling), CliError> {
        let n = self.n_bands;
        let a0 = matrix(&self.a0, n, "a0")?;
        let a1 = matrix(&self.a1, n, "a1")?;
        let b = match &self.b {
            Some(b) => matrix(b, n, "b")?,
            None => linalg::zeros(n, n),
        };
        let coupling = match (&self.potential, &self.potentials) {
            (Some(v), None) => {
                if self.b.is_none() {
                    return Err(CliError::Usage("model file: `potential` needs `b`".into()));
                }
                Coupling::scalar(v.clone().scaled(scale), b.clone())
            }
            (None, Some(vs)) => Coupling::diagonal(vs.iter().map(|v| v.clone().scaled(scale)).collect()),
            _ => return Err(CliError::Usage("model file: give exactly one of `potential`, `potentials`".into())),
        };
        let model = BandModel::new(self.mass, a0, a1, b)?;
        Ok((model, coupling))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Soc { gamma: f64, nu: f64, mu: f64 },
    TwoBand { mu: f64, g: f64, lambda: f64 },
    GeneralB { mu: f64, g: f64, b: [f64; 3] },
    SingleBand { lambda: f64 },
    File,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub family: Family,
    pub mass: f64,
    pub scale: f64,
    pub model: BandModel,
    pub coupling: Coupling,
    /// Closed-form energy where one exists.
    pub target: Option<f64>,
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

impl Problem {
    pub fn resolve(args: &ModelArgs, default: ModelKind) -> Result<Self, CliError> {
        if let Some(path) = &args.model_file {
            let file = ModelFile::load(path)?;
            let (model, coupling) = file.resolve(args.scale)?;
            return Ok(Problem {
                family: Family::File,
                mass: file.mass,
                scale: args.scale,
                model,
                coupling,
                target: file.target,
            });
        }
        let kind = if args.two_band {
            ModelKind::TwoBand
        } else if args.single_band {
            ModelKind::SingleBand
        } else {
            args.model.unwrap_or(default)
        };
        let mass = args.mass.unwrap_or(1.0);
        let scale = args.scale;
        match kind {
            ModelKind::Soc => {
                let (gamma, nu, mu) = (need(args.gamma, "gamma")?, need(args.nu, "nu")?, need(args.mu, "mu")?);
                let b = linalg::real_diag(&[1.0, 0.0]);
                let model = BandModel::spin_orbit(gamma, mu, b.clone(), mass)?;
                let coupling = Coupling::scalar(PotentialSpec::SocBic { gamma, nu }.scaled(scale), b);
                let target = e_bic_analytic(gamma, nu, mu).ok();
                Ok(Problem { family: Family::Soc { gamma, nu, mu }, mass, scale, model, coupling, target })
            }
            ModelKind::TwoBand => {
                let (mu, g) = (need(args.mu, "mu")?, need(args.g, "g")?);
                if let Some(b) = &args.b {
                    let b: [f64; 3] = b
                        .as_slice()
                        .try_into()
                        .map_err(|_| CliError::Usage(format!("--b takes three values, got {}", b.len())))?;
                    let bm = general_matrix(b);
                    let model = BandModel::two_band(mu, g, bm.clone(), mass)?;
                    let coupling = Coupling::scalar(PotentialSpec::Delta { lambda: scale }, bm);
                    let target = delta::general_b_kappa(&linalg::scaled(&general_matrix(b), c64::new(scale, 0.0)), mu, g, mass)
                        .ok()
                        .map(|k| k.e_b);
                    return Ok(Problem { family: Family::GeneralB { mu, g, b }, mass, scale, model, coupling, target });
                }
                let lambda = need(args.lambda, "lambda")?;
                let bm = linalg::real_diag(&[1.0, 0.0]);
                let model = BandModel::two_band(mu, g, linalg::real_diag(&[lambda, 0.0]), mass)?;
                let coupling = Coupling::scalar(PotentialSpec::Delta { lambda: lambda * scale }, bm);
                let target = delta::two_band_solution(mu, g, lambda * scale, mass).ok().map(|s| s.e_b);
                Ok(Problem { family: Family::TwoBand { mu, g, lambda }, mass, scale, model, coupling, target })
            }
            ModelKind::SingleBand => {
                let lambda = need(args.lambda, "lambda")?;
                let model = BandModel::single_band(mass, lambda)?;
                let coupling = Coupling::scalar(PotentialSpec::Delta { lambda: lambda * scale }, linalg::real_diag(&[1.0]));
                let target = delta::single_band_bound(lambda * scale, mass).ok().map(|s| s.e_b);
                Ok(Problem { family: Family::SingleBand { lambda }, mass, scale, model, coupling, target })
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self.family {
            Family::Soc { .. } => "soc",
            Family::TwoBand { .. } => "two_band",
            Family::GeneralB { .. } => "two_band_general_b",
            Family::SingleBand { .. } => "single_band",
            Family::File => "file",
        }
    }

    pub fn setup(&self, grid: Grid) -> Result<Setup, CliError> {
        Ok(Setup::with_coupling(self.model.clone(), self.coupling.clone(), grid)?)
    }

    /// The mixed-pole region containing the target, pulled in slightly from its edges.
    pub fn default_window(&self) -> Result<(f64, f64), CliError> {
        let inside = self
            .target
            .ok_or_else(|| CliError::Usage("no reference energy for this model; pass --window".into()))?;
        let (lo, hi) = spectral::mixed_region_bounds(&self.model, inside)?;
        let (lo, hi) = (lo.max(-1e3), hi.min(1e3));
        let pad = 1e-6 * (1.0 + (hi - lo).abs());
        Ok((lo + pad, hi - pad))
    }
}

pub fn general_matrix(b: [f64; 3]) -> CMat {
    CMat::from_fn(2, 2, |i, j| c64::new([[b[0], b[1]], [b[1], b[2]]][i][j], 0.0))
}

/// Copy of `args` with one parameter replaced.
pub fn with_param(args: &ModelArgs, param: ScanParam, value: f64) -> Result<ModelArgs, CliError> {
    let mut out = args.clone();
    if args.model_file.is_some() && param != ScanParam::Scale {
        return Err(CliError::Usage("model files can only be scanned over --param scale".into()));
    }
    match param {
        ScanParam::Scale => out.scale = value,
        ScanParam::Nu => out.nu = Some(value),
        ScanParam::Gamma => out.gamma = Some(value),
        ScanParam::Mu => out.mu = Some(value),
        ScanParam::G => out.g = Some(value),
        ScanParam::Lambda => out.lambda = Some(value),
    }
    Ok(out)
}

pub fn grid(args: &GridArgs, half_width: f64, n: usize) -> Result<Grid, CliError> {
    Ok(Grid::symmetric(args.half_width.unwrap_or(half_width), args.n.unwrap_or(n))?)
}

/// `lo:hi`.
pub fn parse_window(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("malformed window `{text}`; expected lo:hi"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// `start:stop:count` with `count >= 1`; a single point needs `start == stop`.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("malformed range `{text}`; expected start:stop:count"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() || (count == 1 && start != stop) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|k| if k + 1 == count { stop } else { start + step * k as f64 }).collect())
}
