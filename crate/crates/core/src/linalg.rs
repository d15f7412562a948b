//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Matrices are `faer::Mat<c64>`; vectors are plain `Vec<c64>`. The heavy
//! lifting (LU, eigen-decompositions, SVD) is delegated to faer.

use faer::prelude::*;
use faer::{Mat, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub type CMat = Mat<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Run faer kernels single-threaded so results do not depend on the
/// size of the rayon pool.
pub fn sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn cr(re: f64) -> c64 {
    c64::new(re, 0.0)
}

/// Pauli matrices and identity, the building blocks for two-band models.
pub mod pauli {
    use super::*;

    pub fn identity(n: usize) -> CMat {
        Mat::from_fn(n, n, |i, j| if i == j { cr(1.0) } else { cr(0.0) })
    }

    pub fn sigma_x() -> CMat {
        from_rows(&[&[cr(0.0), cr(1.0)], &[cr(1.0), cr(0.0)]])
    }

    pub fn sigma_y() -> CMat {
        from_rows(&[&[cr(0.0), -I], &[I, cr(0.0)]])
    }

    pub fn sigma_z() -> CMat {
        from_rows(&[&[cr(1.0), cr(0.0)], &[cr(0.0), cr(-1.0)]])
    }
}

pub fn from_rows(rows: &[&[c64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { cr(values[i]) } else { cr(0.0) })
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn scaled(m: &CMat, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn add_scaled(acc: &mut CMat, m: &CMat, s: c64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc[(i, j)] += m[(i, j)] * s;
        }
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut out = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out = out.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    out
}

pub fn is_zero(m: &CMat) -> bool {
    max_abs(m) == 0.0
}

/// Elementwise Hermiticity check with relative tolerance.
pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in 0..=i {
            let a = m[(i, j)];
            let b = m[(j, i)].conj();
            if (a - b).norm() > rel_tol * a.norm().max(b.norm()).max(1.0) {
                return false;
            }
        }
    }
    true
}

pub fn is_real(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

pub fn is_imaginary(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re == 0.0))
}

pub fn mat_vec(m: &CMat, v: &[c64]) -> Vec<c64> {
    assert_eq!(m.ncols(), v.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Eigenvalues of a small Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Unit left and right null vectors of a (numerically) singular square matrix,
/// taken from the smallest singular triplet: `m v = s u` with `s` minimal.
pub fn null_vectors(m: &CMat) -> Result<(Vec<c64>, Vec<c64>, f64)> {
    let svd = m.svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let k = m.ncols() - 1;
    let u = (0..m.nrows()).map(|i| svd.U()[(i, k)]).collect();
    let v = (0..m.ncols()).map(|i| svd.V()[(i, k)]).collect();
    let s = svd.S().column_vector()[k].re;
    Ok((u, v, s))
}

/// Dense polynomial with complex coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<c64>);

impl Poly {
    pub fn constant(c: c64) -> Self {
        Poly(vec![c])
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, x: c64) -> c64 {
        self.0.iter().rev().fold(cr(0.0), |acc, &c| acc * x + c)
    }

    pub fn eval_derivative(&self, x: c64) -> c64 {
        let n = self.0.len();
        if n < 2 {
            return cr(0.0);
        }
        (1..n)
            .rev()
            .fold(cr(0.0), |acc, k| acc * x + self.0[k] * (k as f64))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|k| {
                    self.0.get(k).copied().unwrap_or_default()
                        + other.0.get(k).copied().unwrap_or_default()
                })
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly(vec![]);
        }
        let mut out = vec![cr(0.0); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn scale(&self, s: c64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }
}

/// Determinant of a square matrix of polynomials by cofactor expansion.
///
/// Exact up to rounding; cost grows as N!, fine for the band counts in scope.
pub fn poly_det(entries: &[Vec<Poly>]) -> Poly {
    let n = entries.len();
    let cols: Vec<usize> = (0..n).collect();
    det_minor(entries, 0, &cols)
}

fn det_minor(entries: &[Vec<Poly>], row: usize, cols: &[usize]) -> Poly {
    if cols.len() == 1 {
        return entries[row][cols[0]].clone();
    }
    let mut acc = Poly(vec![cr(0.0)]);
    for (k, &c) in cols.iter().enumerate() {
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = entries[row][c].mul(&det_minor(entries, row + 1, &rest));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc.add(&term.scale(cr(sign)));
    }
    acc
}

/// Dense square operator, real when the underlying physics is real.
#[derive(Debug, Clone)]
pub enum DenseOp {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl DenseOp {
    pub fn dim(&self) -> usize {
        match self {
            DenseOp::Real(m) => m.nrows(),
            DenseOp::Complex(m) => m.nrows(),
        }
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        match self {
            DenseOp::Real(m) => {
                let n = m.nrows();
                let mut out = vec![cr(0.0); n];
                for j in 0..m.ncols() {
                    let xj = x[j];
                    if xj == cr(0.0) {
                        continue;
                    }
                    let col = m.col(j);
                    for i in 0..n {
                        out[i] += xj * col[i];
                    }
                }
                out
            }
            DenseOp::Complex(m) => {
                let n = m.nrows();
                let mut out = vec![cr(0.0); n];
                for j in 0..m.ncols() {
                    let xj = x[j];
                    if xj == cr(0.0) {
                        continue;
                    }
                    let col = m.col(j);
                    for i in 0..n {
                        out[i] += xj * col[i];
                    }
                }
                out
            }
        }
    }

    pub fn to_complex(&self) -> CMat {
        match self {
            DenseOp::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| cr(m[(i, j)])),
            DenseOp::Complex(m) => m.clone(),
        }
    }
}

enum Factor {
    Real(faer::linalg::solvers::PartialPivLu<f64>),
    Complex(faer::linalg::solvers::PartialPivLu<c64>),
}

/// LU factorization of `A - shift·I`, reused for repeated solves.
pub struct ShiftInvert {
    factor: Factor,
    n: usize,
}

impl ShiftInvert {
    pub fn new(op: &DenseOp, shift: c64) -> Self {
        let n = op.dim();
        let factor = match op {
            DenseOp::Real(m) if shift.im == 0.0 => {
                let mut a = m.clone();
                for i in 0..n {
                    a[(i, i)] -= shift.re;
                }
                Factor::Real(a.partial_piv_lu())
            }
            _ => {
                let mut a = op.to_complex();
                for i in 0..n {
                    a[(i, i)] -= shift;
                }
                Factor::Complex(a.partial_piv_lu())
            }
        };
        ShiftInvert { factor, n }
    }

    pub fn solve(&self, rhs: &[c64]) -> Vec<c64> {
        match &self.factor {
            Factor::Real(lu) if rhs.iter().all(|z| z.im == 0.0) => {
                let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i].re);
                lu.solve_in_place(&mut b);
                (0..self.n).map(|i| cr(b[(i, 0)])).collect()
            }
            Factor::Real(lu) => {
                let mut b = Mat::<f64>::from_fn(self.n, 2, |i, j| {
                    if j == 0 {
                        rhs[i].re
                    } else {
                        rhs[i].im
                    }
                });
                lu.solve_in_place(&mut b);
                (0..self.n).map(|i| c64::new(b[(i, 0)], b[(i, 1)])).collect()
            }
            Factor::Complex(lu) => {
                let mut b = Mat::<c64>::from_fn(self.n, 1, |i, _| rhs[i]);
                lu.solve_in_place(&mut b);
                (0..self.n).map(|i| b[(i, 0)]).collect()
            }
        }
    }
}

/// Eigenpair of `op` whose eigenvalue lies nearest `shift`.
///
/// Shift-invert Arnoldi picks the dominant Ritz value of `(A - shift)^-1`;
/// two inverse-iteration sweeps then polish the vector.
pub fn nearest_eigenpair(op: &DenseOp, shift: c64) -> Result<(c64, Vec<c64>)> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::Eigensolver("empty operator".into()));
    }
    if n <= DENSE_LIMIT {
        return dense_nearest(op, shift);
    }
    match arnoldi_nearest(op, shift) {
        // an eigenvalue sitting exactly on the shift makes the factorization singular
        Err(Error::Eigensolver(_)) => arnoldi_nearest(op, shift + cr(1e-10) * (1.0 + shift.norm())),
        other => other,
    }
}

/// Dominant Ritz pair of the leading `k x k` Hessenberg block has residual
/// `beta |y_k| < 1e-13 |theta|`.
fn ritz_converged(h: &Mat<c64>, k: usize, beta: f64) -> Result<bool> {
    let hm = Mat::<c64>::from_fn(k, k, |i, j| h[(i, j)]);
    let eig = hm.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let diag = eig.S().column_vector();
    let best = (0..k).max_by(|&a, &b| diag[a].norm().total_cmp(&diag[b].norm())).unwrap_or(0);
    let y = eig.U();
    let ny = (0..k).map(|i| y[(i, best)].norm_sqr()).sum::<f64>().sqrt();
    Ok(beta * y[(k - 1, best)].norm() / ny < 1e-13 * diag[best].norm())
}

/// Operators up to this size are diagonalized directly.
const DENSE_LIMIT: usize = 64;

fn dense_nearest(op: &DenseOp, shift: c64) -> Result<(c64, Vec<c64>)> {
    let m = op.to_complex();
    let eig = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let best = (0..m.nrows())
        .min_by(|&a, &b| (s[a] - shift).norm().total_cmp(&(s[b] - shift).norm()))
        .unwrap_or(0);
    let mut x: Vec<c64> = (0..m.nrows()).map(|i| eig.U()[(i, best)]).collect();
    let nrm = norm(&x);
    x.iter_mut().for_each(|z| *z /= nrm);
    Ok((s[best], x))
}

fn arnoldi_nearest(op: &DenseOp, shift: c64) -> Result<(c64, Vec<c64>)> {
    let n = op.dim();
    let si = ShiftInvert::new(op, shift);
    let m = n.min(40);

    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(m + 1);
    let mut start: Vec<c64> = (0..n)
        .map(|j| cr(1.0 + 0.25 * ((j as f64) * 0.7548776662).sin()))
        .collect();
    let s = norm(&start);
    start.iter_mut().for_each(|z| *z /= s);
    basis.push(start);

    let mut h = Mat::<c64>::zeros(m + 1, m);
    let mut steps = 0;
    for k in 0..m {
        let mut w = si.solve(&basis[k]);
        if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Eigensolver("shift-invert solve produced non-finite values".into()));
        }
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[(i, k)] += c;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let beta = norm(&w);
        steps = k + 1;
        h[(k + 1, k)] = cr(beta);
        let scale = h[(0, 0)].norm().max(1.0);
        if beta <= 1e-13 * scale {
            break;
        }
        if steps % 6 == 0 && steps < m && ritz_converged(&h, steps, beta)? {
            break;
        }
        w.iter_mut().for_each(|z| *z /= beta);
        basis.push(w);
    }

    let hm = Mat::<c64>::from_fn(steps, steps, |i, j| h[(i, j)]);
    let eig = hm.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let diag = eig.S().column_vector();
    let mut best = 0;
    for i in 1..steps {
        if diag[i].norm() > diag[best].norm() {
            best = i;
        }
    }
    let theta = diag[best];
    let mut x = vec![cr(0.0); n];
    for (k, v) in basis.iter().take(steps).enumerate() {
        let c = eig.U()[(k, best)];
        x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * vi);
    }
    if theta.norm() == 0.0 {
        return Err(Error::Eigensolver("operator has no eigenvalue near the shift".into()));
    }

    let mut lambda = shift + theta.inv();
    for _ in 0..2 {
        let s = norm(&x);
        x.iter_mut().for_each(|z| *z /= s);
        let y = si.solve(&x);
        let t = dot(&x, &y);
        if t.norm() > 0.0 {
            lambda = shift + t.inv();
        }
        x = y;
    }
    let s = norm(&x);
    x.iter_mut().for_each(|z| *z /= s);
    Ok((lambda, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let sx = pauli::sigma_x();
        let sy = pauli::sigma_y();
        let sz = pauli::sigma_z();
        // sigma_x sigma_y = i sigma_z
        let prod = &sx * &sy;
        assert!(max_abs_diff(&prod, &scaled(&sz, I)) < 1e-15);
        for m in [&sx, &sy, &sz] {
            assert!(is_hermitian(m, 1e-14));
        }
    }

    #[test]
    fn poly_det_of_diagonal() {
        // diag(1 - x, 2 + x) -> (1 - x)(2 + x) = 2 - x - x^2
        let e = vec![
            vec![Poly(vec![cr(1.0), cr(-1.0)]), Poly(vec![cr(0.0)])],
            vec![Poly(vec![cr(0.0)]), Poly(vec![cr(2.0), cr(1.0)])],
        ];
        let d = poly_det(&e);
        assert_eq!(d.0[0], cr(2.0));
        assert_eq!(d.0[1], cr(-1.0));
        assert_eq!(d.0[2], cr(-1.0));
        assert_eq!(d.eval_derivative(cr(1.0)), cr(-3.0));
    }

    #[test]
    fn nearest_eigenpair_finds_closest() {
        let op = DenseOp::Real(Mat::from_fn(5, 5, |i, j| {
            if i == j {
                [0.1, 0.5, 0.95, 1.6, 3.0][i]
            } else if i.abs_diff(j) == 1 {
                1e-3
            } else {
                0.0
            }
        }));
        let (lam, v) = nearest_eigenpair(&op, cr(1.0)).unwrap();
        assert!((lam.re - 0.95).abs() < 1e-5, "{lam}");
        let av = op.apply(&v);
        let r: f64 = av.iter().zip(&v).map(|(a, b)| (a - lam * b).norm_sqr()).sum::<f64>().sqrt();
        assert!(r < 1e-12);
    }

    #[test]
    fn null_vectors_of_rank_one() {
        let m = from_rows(&[&[cr(1.0), cr(1.0)], &[cr(1.0), cr(1.0)]]);
        let (u, v, s) = null_vectors(&m).unwrap();
        assert!(s < 1e-14);
        assert!(norm(&mat_vec(&m, &v)) < 1e-14);
        let uh: Vec<c64> = (0..2).map(|j| (0..2).map(|i| u[i].conj() * m[(i, j)]).sum()).collect();
        assert!(norm(&uh) < 1e-14);
    }
}
