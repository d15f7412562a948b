//! Localized potentials `V(x)` and their coupling matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{self, c64, CMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `lambda delta(x)`; on a grid a single site of height `lambda/dx` nearest 0.
    Delta { lambda: f64 },
    /// The spin-orbit verification potential.
    SocBic { gamma: f64, nu: f64 },
    /// Samples on their own grid, linearly interpolated and zero-extended.
    Tabulated { grid: Grid, values: Vec<f64> },
    Scaled { base: Box<PotentialSpec>, factor: f64 },
}

fn soc_constants(gamma: f64, nu: f64) -> Result<(f64, f64)> {
    let rad = 1.0 - gamma * gamma * nu * nu;
    if !(rad > 0.0) {
        return Err(Error::InvalidRadicand(rad));
    }
    let root = rad.sqrt();
    let alpha = gamma * gamma + 2.0 * nu * nu + root;
    let alpha_p = 1.0 + root;
    if alpha_p <= nu * nu {
        return Err(Error::SingularDenominator);
    }
    Ok((alpha, alpha_p))
}

/// `V(x) = 2 nu^2 [3 nu^2 - alpha cosh^2(nu x)] / (cosh^2(nu x) [alpha' cosh^2(nu x) - nu^2])`.
pub fn potential_soc_bic(gamma: f64, nu: f64, x: f64) -> Result<f64> {
    let (alpha, alpha_p) = soc_constants(gamma, nu)?;
    Ok(soc_value(alpha, alpha_p, nu, x))
}

fn soc_value(alpha: f64, alpha_p: f64, nu: f64, x: f64) -> f64 {
    let t = (nu * x).abs();
    if t > 350.0 {
        return 0.0;
    }
    let c2 = t.cosh().powi(2);
    2.0 * nu * nu * (3.0 * nu * nu - alpha * c2) / (c2 * (alpha_p * c2 - nu * nu))
}

/// `E_BIC = -nu^2/2 + sqrt(mu^2 - nu^2 gamma^2)`.
pub fn e_bic_analytic(gamma: f64, nu: f64, mu: f64) -> Result<f64> {
    let rad = mu * mu - nu * nu * gamma * gamma;
    if !(rad > 0.0) {
        return Err(Error::InvalidRadicand(rad));
    }
    Ok(-nu * nu / 2.0 + rad.sqrt())
}

impl PotentialSpec {
    pub fn scaled(self, factor: f64) -> Self {
        PotentialSpec::Scaled { base: Box::new(self), factor }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Delta { lambda } if !lambda.is_finite() => {
                Err(Error::InvalidPotential("delta strength is not finite".into()))
            }
            PotentialSpec::Delta { .. } => Ok(()),
            PotentialSpec::SocBic { gamma, nu } => {
                if *nu <= 0.0 {
                    return Err(Error::InvalidPotential(format!("nu = {nu} must be positive")));
                }
                soc_constants(*gamma, *nu).map(|_| ())
            }
            PotentialSpec::Tabulated { grid, values } => {
                if values.len() != grid.n_points {
                    return Err(Error::InvalidPotential("tabulated length mismatch".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPotential("tabulated values must be finite".into()));
                }
                Ok(())
            }
            PotentialSpec::Scaled { base, factor } => {
                if !factor.is_finite() {
                    return Err(Error::InvalidPotential("scale factor is not finite".into()));
                }
                base.validate()
            }
        }
    }

    pub fn is_delta(&self) -> bool {
        match self {
            PotentialSpec::Delta { .. } => true,
            PotentialSpec::Scaled { base, .. } => base.is_delta(),
            _ => false,
        }
    }

    /// Pointwise value for smooth potentials; `None` for a delta.
    pub fn value(&self, x: f64) -> Option<f64> {
        match self {
            PotentialSpec::Delta { .. } => None,
            PotentialSpec::SocBic { gamma, nu } => potential_soc_bic(*gamma, *nu, x).ok(),
            PotentialSpec::Tabulated { grid, values } => Some(interpolate(grid, values, x)),
            PotentialSpec::Scaled { base, factor } => base.value(x).map(|v| v * factor),
        }
    }

    /// Values on the solver grid, with deltas lumped to the center site.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            PotentialSpec::Delta { lambda } => {
                let mut v = vec![0.0; grid.n_points];
                v[grid.center_index()] = lambda / grid.dx;
                Ok(v)
            }
            PotentialSpec::SocBic { gamma, nu } => {
                let (alpha, alpha_p) = soc_constants(*gamma, *nu)?;
                Ok(grid.points().into_iter().map(|x| soc_value(alpha, alpha_p, *nu, x)).collect())
            }
            PotentialSpec::Tabulated { grid: tab, values } => {
                if tab.x_min > grid.x_min + 1e-12 || tab.x_max() < grid.x_max() - 1e-12 {
                    log::warn!(
                        "tabulated potential covers [{}, {}], solver grid [{}, {}]; zero-extending",
                        tab.x_min,
                        tab.x_max(),
                        grid.x_min,
                        grid.x_max()
                    );
                }
                Ok(grid.points().into_iter().map(|x| interpolate(tab, values, x)).collect())
            }
            PotentialSpec::Scaled { base, factor } => {
                Ok(base.sample(grid)?.into_iter().map(|v| v * factor).collect())
            }
        }
    }

    /// Slowest spatial decay rate, used to size default grids.
    pub fn decay_rate(&self) -> Option<f64> {
        match self {
            PotentialSpec::SocBic { nu, .. } => Some(2.0 * nu),
            PotentialSpec::Scaled { base, .. } => base.decay_rate(),
            _ => None,
        }
    }

    /// Parse two-column text `x V(x)`; blank lines and `#` comments are skipped.
    /// The abscissae must form a symmetric uniform grid.
    pub fn parse_tabulated(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let mut next = || -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(next()?);
            vs.push(next()?);
        }
        if xs.len() < 2 {
            return Err(Error::Parse("need at least two samples".into()));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (k, x) in xs.iter().enumerate() {
            if (x - (xs[0] + k as f64 * dx)).abs() > 1e-6 * dx {
                return Err(Error::Parse(format!("abscissa {k} is not on a uniform grid")));
            }
        }
        let grid = Grid::from_parts(xs[0], dx, xs.len()).map_err(|e| Error::Parse(e.to_string()))?;
        let spec = PotentialSpec::Tabulated { grid, values: vs };
        spec.validate()?;
        Ok(spec)
    }
}

fn interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let t = (x - grid.x_min) / grid.dx;
    if t < -1e-9 || t > (grid.n_points - 1) as f64 + 1e-9 {
        return 0.0;
    }
    let t = t.clamp(0.0, (grid.n_points - 1) as f64);
    let i = (t.floor() as usize).min(grid.n_points - 2);
    let f = t - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// `W(x) = sum_t V_t(x) B_t`: the full localized interaction.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub terms: Vec<(PotentialSpec, CMat)>,
}

impl Coupling {
    pub fn scalar(potential: PotentialSpec, b: CMat) -> Self {
        Coupling { terms: vec![(potential, b)] }
    }

    /// `diag(V_1, ..., V_N)`.
    pub fn diagonal(potentials: Vec<PotentialSpec>) -> Self {
        let n = potentials.len();
        let terms = potentials
            .into_iter()
            .enumerate()
            .map(|(c, v)| {
                let mut b = linalg::zeros(n, n);
                b[(c, c)] = c64::new(1.0, 0.0);
                (v, b)
            })
            .collect();
        Coupling { terms }
    }

    pub fn n_channels(&self) -> usize {
        self.terms.first().map_or(0, |(_, b)| b.nrows())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidPotential("coupling has no terms".into()));
        }
        for (v, b) in &self.terms {
            v.validate()?;
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::InvalidPotential(format!("coupling matrix must be {n}x{n}")));
            }
            if !linalg::is_hermitian(b, 1e-12) {
                return Err(Error::InvalidPotential("coupling matrix is not Hermitian".into()));
            }
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, b)| linalg::is_real(b))
    }

    pub fn has_delta(&self) -> bool {
        self.terms.iter().any(|(v, _)| v.is_delta())
    }

    pub fn decay_rate(&self) -> Option<f64> {
        self.terms.iter().filter_map(|(v, _)| v.decay_rate()).reduce(f64::min)
    }

    /// `W(x_i)` at every grid site.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<CMat>> {
        let n = self.n_channels();
        let mut out = vec![linalg::zeros(n, n); grid.n_points];
        for (v, b) in &self.terms {
            for (w, vi) in out.iter_mut().zip(v.sample(grid)?) {
                if vi != 0.0 {
                    linalg::add_scaled(w, b, c64::new(vi, 0.0));
                }
            }
        }
        Ok(out)
    }
}
