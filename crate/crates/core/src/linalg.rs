//! Dense complex linear algebra: the numeric substrate for states,
//! operators, Choi matrices and vectorized super-operators.
//!
//! Everything here is immutable after construction and pure, so values can
//! be shared freely across threads. Matrices are stored row-major;
//! vectorization is column-major so that `vec(X rho Y) = (Y^T (x) X) vec(rho)`
//! holds as stated.

use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout.
pub type Scalar = Complex64;

/// Shorthand for a real scalar promoted to [`Scalar`].
pub fn re(x: f64) -> Scalar {
    Scalar::new(x, 0.0)
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("Jacobi sweep limit reached (off-diagonal mass {0:.3e})")]
    NoConvergence(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("non-finite entry at ({0},{1})")]
    NonFinite(usize, usize),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense complex matrix. Vectors are single-column matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting NaN/Inf entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Scalar>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "expected {}x{}={} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        for (k, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite(k / cols.max(1), k % cols.max(1)));
            }
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![Scalar::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn col_vec(entries: &[Scalar]) -> Self {
        ComplexMatrix { rows: entries.len(), cols: 1, data: entries.to_vec() }
    }

    /// Square matrix with the given diagonal.
    pub fn diag(entries: &[Scalar]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, z) in entries.iter().enumerate() {
            m.set(i, i, *z);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "add {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ComplexMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-Scalar::ONE))
    }

    pub fn scale(&self, k: Scalar) -> Self {
        let data = self.data.iter().map(|a| a * k).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LinalgError::ShapeMismatch(format!(
                "matmul {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Scalar::ZERO {
                    continue;
                }
                let row = i * other.cols;
                let orow = k * other.cols;
                for j in 0..other.cols {
                    out.data[row + j] += a * other.data[orow + j];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        let data = self.data.iter().map(|z| z.conj()).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn trace(&self) -> Result<Scalar> {
        if !self.is_square() {
            return Err(LinalgError::ShapeMismatch(format!(
                "trace of non-square {}x{}",
                self.rows, self.cols
            )));
        }
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Relative Frobenius closeness: `|a - b| <= tol * max(1, |a|)`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        let dist: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        dist <= tol * self.frob_norm().max(1.0)
    }

    /// Kronecker product; `(A (x) B)[(i*rB+k),(j*cB+l)] = A[i,j] * B[k,l]`.
    pub fn kron(&self, other: &Self) -> Self {
        let (ra, ca) = (self.rows, self.cols);
        let (rb, cb) = (other.rows, other.cols);
        let mut out = Self::zeros(ra * rb, ca * cb);
        for i in 0..ra {
            for j in 0..ca {
                let a = self.get(i, j);
                if a == Scalar::ZERO {
                    continue;
                }
                for k in 0..rb {
                    for l in 0..cb {
                        out.set(i * rb + k, j * cb + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Reduced operator on the factors listed in `keep` (ascending order of
    /// the kept positions). `dims` are the tensor factor dimensions, leftmost
    /// factor most significant.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        if !self.is_square() {
            return Err(LinalgError::ShapeMismatch("partial trace of non-square".into()));
        }
        let total: usize = dims.iter().product();
        if total != self.rows {
            return Err(LinalgError::ShapeMismatch(format!(
                "factor dims product {} != matrix size {}",
                total, self.rows
            )));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.iter().any(|&k| k >= dims.len()) {
            return Err(LinalgError::BadIndex("keep index out of range".into()));
        }
        let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
        let keep_dim: usize = keep.iter().map(|&i| dims[i]).product();
        let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();

        // Decompose a flat index into per-factor digits.
        let digits = |mut idx: usize| -> Vec<usize> {
            let mut out = vec![0usize; dims.len()];
            for i in (0..dims.len()).rev() {
                out[i] = idx % dims[i];
                idx /= dims[i];
            }
            out
        };
        let flat = |positions: &[usize], ds: &[usize]| -> usize {
            positions.iter().fold(0usize, |acc, &p| acc * dims[p] + ds[p])
        };

        let mut out = Self::zeros(keep_dim, keep_dim);
        for r in 0..self.rows {
            let dr = digits(r);
            for c in 0..self.cols {
                let dc = digits(c);
                if traced.iter().any(|&t| dr[t] != dc[t]) {
                    continue;
                }
                let _ = traced_dim;
                let kr = flat(&keep, &dr);
                let kc = flat(&keep, &dc);
                let v = out.get(kr, kc) + self.get(r, c);
                out.set(kr, kc, v);
            }
        }
        Ok(out)
    }

    /// Column-major stacking into a single column.
    pub fn vectorize(&self) -> Self {
        let mut data = Vec::with_capacity(self.rows * self.cols);
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        ComplexMatrix { rows: self.rows * self.cols, cols: 1, data }
    }

    /// Inverse of [`vectorize`](Self::vectorize).
    pub fn devectorize(v: &Self, rows: usize, cols: usize) -> Result<Self> {
        if v.cols != 1 || v.rows != rows * cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "devectorize {}x{} into {}x{}",
                v.rows, v.cols, rows, cols
            )));
        }
        let mut out = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                out.set(r, c, v.data[c * rows + r]);
            }
        }
        Ok(out)
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    fn hermitian_asymmetry(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self.get(i, j) - self.get(j, i).conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermitian_asymmetry() <= tol * self.frob_norm().max(1.0)
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Sweeps run until the off-diagonal Frobenius mass drops below
    /// `1e-12 * |A|`, up to 100 sweeps.
    pub fn hermitian_eig(&self, herm_tol: f64) -> Result<EigenDecomposition> {
        if !self.is_square() {
            return Err(LinalgError::ShapeMismatch("eig of non-square".into()));
        }
        if !self.is_hermitian(herm_tol) {
            return Err(LinalgError::NotHermitian(self.hermitian_asymmetry()));
        }
        let n = self.rows;
        // Symmetrize to remove the sub-tolerance asymmetry up front.
        let mut a = Self::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * re(0.5));
        let mut v = Self::identity(n);
        let threshold = 1e-12 * a.frob_norm();

        let off = |m: &Self| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m.get(i, j).norm_sqr();
                    }
                }
            }
            s.sqrt()
        };

        // Pivots contributing negligibly to the off-diagonal mass are
        // skipped; rotating them risks denormal arithmetic.
        let skip_below = threshold / ((n * n) as f64 + 1.0);
        let mut converged = off(&a) <= threshold;
        for _sweep in 0..100 {
            if converged {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let b = a.get(p, q);
                    let absb = b.norm();
                    if absb <= skip_below || absb < 1e-300 {
                        continue;
                    }
                    let phase = Scalar::new(b.re / absb, b.im / absb);
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    // t solves t^2 - 2*theta*t - 1 = 0; take the smaller root.
                    let theta = (app - aqq) / (2.0 * absb);
                    let t = if theta >= 0.0 {
                        -1.0 / (theta + (theta * theta + 1.0).sqrt())
                    } else {
                        1.0 / (-theta + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;

                    // Columns: [cp, cq] <- [c*cp - s*conj(phase)*cq, s*phase*cp + c*cq]
                    for i in 0..n {
                        let aip = a.get(i, p);
                        let aiq = a.get(i, q);
                        a.set(i, p, aip * re(c) - aiq * phase.conj() * re(s));
                        a.set(i, q, aip * phase * re(s) + aiq * re(c));
                    }
                    // Rows (conjugate rotation).
                    for j in 0..n {
                        let apj = a.get(p, j);
                        let aqj = a.get(q, j);
                        a.set(p, j, apj * re(c) - aqj * phase * re(s));
                        a.set(q, j, apj * phase.conj() * re(s) + aqj * re(c));
                    }
                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, vip * re(c) - viq * phase.conj() * re(s));
                        v.set(i, q, vip * phase * re(s) + viq * re(c));
                    }
                }
            }
            converged = off(&a) <= threshold;
        }
        if !converged {
            return Err(LinalgError::NoConvergence(off(&a)));
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).re.partial_cmp(&a.get(j, j).re).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
        let eigenvectors = Self::from_fn(n, n, |i, j| v.get(i, order[j]));
        Ok(EigenDecomposition { eigenvalues, eigenvectors })
    }

    pub fn min_eigenvalue(&self, herm_tol: f64) -> Result<f64> {
        let eig = self.hermitian_eig(herm_tol)?;
        Ok(eig.eigenvalues.first().copied().unwrap_or(0.0))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        if !self.is_square() {
            return Err(LinalgError::ShapeMismatch("psd test of non-square".into()));
        }
        if !self.is_hermitian(tol.max(1e-8)) {
            return Ok(false);
        }
        let min = self.min_eigenvalue(tol.max(1e-8))?;
        Ok(min >= -tol * self.frob_norm().max(1.0))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        match self.adjoint().matmul(self) {
            Ok(p) => p.approx_eq(&Self::identity(self.rows), tol),
            Err(_) => false,
        }
    }

    pub fn is_projection(&self, tol: f64) -> Result<bool> {
        let sq = self.matmul(self)?;
        Ok(self.is_psd(tol)? && sq.approx_eq(self, tol))
    }

    pub fn is_effect(&self, tol: f64) -> Result<bool> {
        let id = Self::identity(self.rows);
        Ok(self.is_psd(tol)? && id.sub(self)?.is_psd(tol)?)
    }

    pub fn is_density(&self, tol: f64) -> Result<bool> {
        let tr = self.trace()?;
        Ok(self.is_psd(tol)? && (tr - Scalar::ONE).norm() <= tol)
    }

    pub fn is_partial_density(&self, tol: f64) -> Result<bool> {
        let tr = self.trace()?;
        Ok(self.is_psd(tol)? && tr.im.abs() <= tol && tr.re <= 1.0 + tol)
    }

    /// Löwner order: `A ⊑ B` iff `B - A` is positive semidefinite.
    pub fn loewner_leq(&self, other: &Self, tol: f64) -> Result<bool> {
        if self.rows != other.rows || self.cols != other.cols || !self.is_square() {
            return Err(LinalgError::ShapeMismatch(format!(
                "loewner {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let herm_tol = tol.max(1e-8);
        if !self.is_hermitian(herm_tol) {
            return Err(LinalgError::NotHermitian(self.hermitian_asymmetry()));
        }
        if !other.is_hermitian(herm_tol) {
            return Err(LinalgError::NotHermitian(other.hermitian_asymmetry()));
        }
        other.sub(self)?.is_psd(tol)
    }

    /// Solves `A X = B` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        if !self.is_square() || self.rows != rhs.rows {
            return Err(LinalgError::ShapeMismatch(format!(
                "solve {}x{} with rhs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let mut pivot = col;
            let mut best = a.get(col, col).norm();
            for r in (col + 1)..n {
                let v = a.get(r, col).norm();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best < 1e-300 {
                return Err(LinalgError::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    let (x, y) = (a.get(col, j), a.get(pivot, j));
                    a.set(col, j, y);
                    a.set(pivot, j, x);
                }
                for j in 0..m {
                    let (x, y) = (b.get(col, j), b.get(pivot, j));
                    b.set(col, j, y);
                    b.set(pivot, j, x);
                }
            }
            let inv = Scalar::ONE / a.get(col, col);
            for r in (col + 1)..n {
                let f = a.get(r, col) * inv;
                if f == Scalar::ZERO {
                    continue;
                }
                for j in col..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                }
                for j in 0..m {
                    let v = b.get(r, j) - f * b.get(col, j);
                    b.set(r, j, v);
                }
            }
        }
        let mut x = Self::zeros(n, m);
        for j in 0..m {
            for r in (0..n).rev() {
                let mut acc = b.get(r, j);
                for k in (r + 1)..n {
                    acc -= a.get(r, k) * x.get(k, j);
                }
                x.set(r, j, acc / a.get(r, r));
            }
        }
        Ok(x)
    }
}

impl std::fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:>12.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Result of [`ComplexMatrix::hermitian_eig`]: real eigenvalues in ascending
/// order and the matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Rebuilds `V diag(f(lambda)) V^dag`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> Scalar) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let d = ComplexMatrix::diag(&self.eigenvalues.iter().map(|&l| f(l)).collect::<Vec<_>>());
        v.matmul(&d).unwrap().matmul(&v.adjoint()).unwrap()
    }
}
