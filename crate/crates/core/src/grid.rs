//! Uniform symmetric grids and spinor fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c64;

pub const MIN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub dx: f64,
    pub n_points: usize,
}

impl Grid {
    /// `n_points` sites spanning `[-half_width, half_width]` inclusive.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} is below the minimum {MIN_POINTS}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        let dx = 2.0 * half_width / (n_points - 1) as f64;
        Ok(Grid { x_min: -half_width, dx, n_points })
    }

    pub fn from_parts(x_min: f64, dx: f64, n_points: usize) -> Result<Self> {
        let grid = Grid { x_min, dx, n_points };
        if n_points < MIN_POINTS || !(dx > 0.0) {
            return Err(Error::InvalidGrid(format!("bad grid {grid:?}")));
        }
        let expect = -((n_points - 1) as f64) * dx / 2.0;
        if (x_min - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
            return Err(Error::InvalidGrid(format!("grid not symmetric: x_min {x_min}, expected {expect}")));
        }
        Ok(grid)
    }

    pub fn x(&self, i: usize) -> f64 {
        // Mirror-exact: x(n-1-i) == -x(i).
        let half = (self.n_points - 1) as f64 / 2.0;
        (i as f64 - half) * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n_points - 1)
    }

    pub fn half_width(&self) -> f64 {
        self.x_max()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the site nearest the origin; for even `n_points` the one at `+dx/2`.
    pub fn center_index(&self) -> usize {
        self.n_points / 2
    }

    /// Trapezoid weight of site `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.dx
        } else {
            self.dx
        }
    }
}

/// `n_points x n_channels` complex samples stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: Grid,
    pub n_channels: usize,
    values: Vec<c64>,
}

impl SpinorField {
    pub fn new(grid: Grid, n_channels: usize, values: Vec<c64>) -> Result<Self> {
        if values.len() != grid.n_points * n_channels {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.n_points * n_channels,
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidGrid("spinor field has non-finite entries".into()));
        }
        Ok(SpinorField { grid, n_channels, values })
    }

    pub fn from_fn(grid: Grid, n_channels: usize, f: impl Fn(f64) -> Vec<c64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_points * n_channels);
        for i in 0..grid.n_points {
            let v = f(grid.x(i));
            if v.len() != n_channels {
                return Err(Error::InvalidGrid("sampler returned wrong channel count".into()));
            }
            values.extend(v);
        }
        Self::new(grid, n_channels, values)
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn at(&self, i: usize, c: usize) -> c64 {
        self.values[i * self.n_channels + c]
    }

    pub fn spinor(&self, i: usize) -> &[c64] {
        &self.values[i * self.n_channels..(i + 1) * self.n_channels]
    }

    pub fn channel(&self, c: usize) -> Vec<c64> {
        (0..self.grid.n_points).map(|i| self.at(i, c)).collect()
    }

    /// Euclidean spinor norm at site `i`.
    pub fn local_norm(&self, i: usize) -> f64 {
        self.spinor(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sum |psi|^2 dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: c64) {
        for z in &mut self.values {
            *z *= s;
        }
    }

    /// Rescale so the entry of largest modulus becomes real and equal to 1.
    pub fn normalize_max(&mut self) {
        let pivot = self
            .values
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(c64::new(0.0, 0.0));
        if pivot.norm() > 0.0 {
            self.scale(pivot.inv());
        }
    }

    /// Rescale to `sum |psi|^2 dx = 1`.
    pub fn normalize_l2(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.scale(c64::new(1.0 / n, 0.0));
        }
    }

    /// Text rows `x Re psi_0 Im psi_0 ...` with a `#` column header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# x");
        for c in 0..self.n_channels {
            out.push_str(&format!("\tre_psi{c}\tim_psi{c}"));
        }
        out.push('\n');
        for i in 0..self.grid.n_points {
            out.push_str(&format!("{:.12e}", self.grid.x(i)));
            for z in self.spinor(i) {
                out.push_str(&format!("\t{:.12e}\t{:.12e}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}
