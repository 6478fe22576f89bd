//! Small dense linear algebra: just enough for LTC rollouts, feature
//! extraction, analytic Lipschitz bounds, and the Gaussian Bayes
//! classifier. Everything is `f64`, row-major, and deterministic.

use crate::{Error, Result};

/// Dense row-major matrix view over owned storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Structural(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out = self^T * x`.
    pub fn matvec_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for i in 0..self.rows {
            let xi = x[i];
            let row = self.row(i);
            for (o, &r) in out.iter_mut().zip(row) {
                *o += xi * r;
            }
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        norm2(&self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale_in_place(v: &mut [f64], s: f64) {
    for x in v {
        *x *= s;
    }
}

pub fn normalize_in_place(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        scale_in_place(v, 1.0 / n);
    }
    n
}

/// Mean, population standard deviation, min and max of a slice.
pub fn stats(v: &[f64]) -> (f64, f64, f64, f64) {
    assert!(!v.is_empty());
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (mean, var.sqrt(), min, max)
}

/// Deterministic, dimension-dependent start vector for power iterations.
fn start_vector(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i + 1) as f64).sin()).collect();
    normalize_in_place(&mut v);
    v
}

/// Largest singular value via power iteration on `A^T A`.
///
/// `warm_start` reuses a previous right singular vector; useful when calling
/// on a slowly-varying sequence of matrices.
pub fn spectral_norm_warm(
    m: &Matrix,
    max_iters: usize,
    rel_tol: f64,
    warm_start: Option<&mut Vec<f64>>,
) -> f64 {
    if m.rows == 0 || m.cols == 0 {
        return 0.0;
    }
    let mut local = start_vector(m.cols);
    let v: &mut Vec<f64> = match warm_start {
        Some(w) if w.len() == m.cols && norm2(w) > 0.0 => w,
        Some(w) => {
            *w = local.clone();
            w
        }
        None => &mut local,
    };
    let mut u = vec![0.0; m.rows];
    let mut sigma = 0.0;
    for _ in 0..max_iters {
        m.matvec_into(v, &mut u);
        let s = norm2(&u);
        if s == 0.0 {
            return 0.0;
        }
        m.matvec_transpose_into(&u, v);
        let back = normalize_in_place(v);
        let new_sigma = if back > 0.0 { back / s } else { s };
        // back = ||A^T A v|| and s = ||A v||, so back/s -> sigma_max.
        if (new_sigma - sigma).abs() <= rel_tol * new_sigma.max(1e-300) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

pub fn spectral_norm(m: &Matrix, max_iters: usize, rel_tol: f64) -> f64 {
    spectral_norm_warm(m, max_iters, rel_tol, None)
}

/// Spectral radius (largest eigenvalue modulus) of a real square matrix,
/// by Gelfand's formula with repeated squaring.
///
/// With `A^(2^m)` tracked as a unit-Frobenius matrix times a logged
/// scale, `rho(A) = lim |A^(2^m)|^(1/2^m)`; the non-dominant and
/// polynomial correction factors decay like `log(N)/N` with `N = 2^m`,
/// so a few dozen squarings reach f64 precision. Unlike plain power
/// iteration this handles the complex-conjugate dominant pairs that
/// random recurrent weight matrices routinely have.
pub fn spectral_radius(m: &Matrix, max_squarings: usize, tol: f64) -> f64 {
    assert_eq!(m.rows, m.cols, "spectral radius needs a square matrix");
    if m.rows == 0 {
        return 0.0;
    }
    let mut b = m.clone();
    let norm0 = b.frobenius();
    if norm0 == 0.0 || !norm0.is_finite() {
        return if norm0 == 0.0 { 0.0 } else { f64::INFINITY };
    }
    scale_in_place(&mut b.data, 1.0 / norm0);
    let mut log_rho = norm0.ln();
    let mut weight = 1.0f64;
    for _ in 0..max_squarings.max(40) {
        let c = b.matmul(&b);
        let norm = c.frobenius();
        if norm == 0.0 {
            return 0.0; // nilpotent
        }
        b = c;
        scale_in_place(&mut b.data, 1.0 / norm);
        weight /= 2.0;
        log_rho += weight * norm.ln();
        if weight * norm.ln().abs() < tol.max(1e-300) {
            break;
        }
    }
    log_rho.exp()
}

/// Cholesky factor of a symmetric positive-definite matrix, with automatic
/// ridge escalation when the factorization stalls. Returns the lower factor
/// and the ridge that was finally applied (0.0 when none was needed).
pub fn cholesky_with_ridge(a: &Matrix, base_ridge: f64) -> Result<(Matrix, f64)> {
    assert_eq!(a.rows, a.cols);
    let mut ridge = 0.0;
    let mut attempt_ridge = base_ridge;
    for _ in 0..40 {
        match try_cholesky(a, ridge) {
            Some(l) => return Ok((l, ridge)),
            None => {
                ridge = attempt_ridge;
                attempt_ridge *= 10.0;
            }
        }
    }
    Err(Error::Structural(format!(
        "cholesky failed even with ridge {ridge}"
    )))
}

fn try_cholesky(a: &Matrix, ridge: f64) -> Option<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.at(i, j);
            if i == j {
                s += ridge;
            }
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                *l.at_mut(i, j) = s.sqrt();
            } else {
                *l.at_mut(i, j) = s / l.at(j, j);
            }
        }
    }
    Some(l)
}

/// Solve `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.at(i, k) * y[k];
        }
        y[i] = s / l.at(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.at(k, i) * x[k];
        }
        x[i] = s / l.at(i, i);
    }
    x
}

/// `log det(L L^T) = 2 sum log L_ii`.
pub fn cholesky_log_det(l: &Matrix) -> f64 {
    (0..l.rows).map(|i| l.at(i, i).ln()).sum::<f64>() * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn matvec_matches_manual() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, -7.0]).unwrap();
        let s = spectral_norm(&m, 200, 1e-12);
        assert!((s - 7.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn spectral_radius_scaled_identity() {
        let mut m = Matrix::identity(12);
        scale_in_place(&mut m.data, 0.5);
        let r = spectral_radius(&m, 300, 1e-10);
        assert!((r - 0.5).abs() < 1e-8, "{r}");
    }

    #[test]
    fn spectral_radius_zero_and_nilpotent() {
        let z = Matrix::zeros(4, 4);
        assert_eq!(spectral_radius(&z, 100, 1e-10), 0.0);
        // Strictly upper triangular: all eigenvalues zero.
        let mut nil = Matrix::zeros(3, 3);
        *nil.at_mut(0, 1) = 2.0;
        *nil.at_mut(1, 2) = -5.0;
        let r = spectral_radius(&nil, 200, 1e-10);
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn spectral_radius_complex_pair() {
        // Rotation scaled by 0.9: eigenvalues 0.9 * exp(+-i theta).
        let theta: f64 = 0.7;
        let m = Matrix::from_vec(
            2,
            2,
            vec![
                0.9 * theta.cos(),
                -0.9 * theta.sin(),
                0.9 * theta.sin(),
                0.9 * theta.cos(),
            ],
        )
        .unwrap();
        let r = spectral_radius(&m, 300, 1e-12);
        assert!((r - 0.9).abs() < 1e-9, "{r}");
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = B B^T + I is SPD.
        let mut rng = RngStream::new(5);
        let n = 6;
        let b = Matrix::from_vec(n, n, rng.normal_vec(n * n, 1.0)).unwrap();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *a.at_mut(i, j) = dot(b.row(i), b.row(j)) + if i == j { 1.0 } else { 0.0 };
            }
        }
        let (l, ridge) = cholesky_with_ridge(&a, 1e-12).unwrap();
        assert_eq!(ridge, 0.0);
        let x_true = rng.normal_vec(n, 1.0);
        let rhs = a.matvec(&x_true);
        let x = cholesky_solve(&l, &rhs);
        for (xa, xb) in x.iter().zip(&x_true) {
            assert!((xa - xb).abs() < 1e-8);
        }
    }

    #[test]
    fn cholesky_ridges_singular_matrix() {
        let a = Matrix::zeros(3, 3);
        let (_, ridge) = cholesky_with_ridge(&a, 1e-9).unwrap();
        assert!(ridge > 0.0);
    }

    #[test]
    fn stats_basics() {
        let (mean, std, min, max) = stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mean, 2.5);
        assert!((std - (1.25f64).sqrt()).abs() < 1e-12);
        assert_eq!((min, max), (1.0, 4.0));
    }
}
