//! Dense linear algebra used throughout the crate.
//!
//! Matrices are stored column-major so that [`vec`] is a copy of the backing
//! buffer. Every block-indexed formula for O(n) relies on this layout.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default reciprocal condition threshold for [`left_moore_penrose`].
pub const DEFAULT_RCOND: f64 = 1e-12;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<DenseMatrix> for RawMatrix {
    fn from(m: DenseMatrix) -> Self {
        RawMatrix { rows: m.rows, cols: m.cols, data: m.data }
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

impl DenseMatrix {
    /// Builds a matrix from column-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major literal, convenient in tests: `from_rows(&[&[1., 3.], &[2., 4.]])`.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dim("ragged rows"));
        }
        let m = Self::from_fn(r, c, |i, j| rows[i][j]);
        Self::new(r, c, m.data)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|col| col.len() != r) {
            return Err(Error::dim("columns of different lengths"));
        }
        Self::new(r, c, columns.concat())
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { 0.0 })
    }

    /// `a bᵗ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &DenseMatrix) -> DenseMatrix {
        let (p, q) = (other.rows, other.cols);
        DenseMatrix::from_fn(self.rows * p, self.cols * q, |i, j| {
            self[(i / p, j / q)] * other[(i % p, j % q)]
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows)
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max |self - other|` entrywise. Shapes must agree.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max |self - selfᵗ|`.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..j {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(M + Mᵗ) / 2`.
    pub fn symmetrized(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in rhs.column(j).iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                for (d, a) in dst.iter_mut().zip(self.column(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::dim(format!("{}x{} times vector of length {}", self.rows, self.cols, v.len())));
        }
        let mut out = vec![0.0; self.rows];
        for (col, &b) in self.columns().zip(v) {
            for (d, a) in out.iter_mut().zip(col) {
                *d += a * b;
            }
        }
        Ok(out)
    }

    /// `tr(selfᵗ other)`, the Frobenius inner product.
    pub fn frobenius_dot(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in frobenius_dot");
        dot(&self.data, &other.data)
    }

    /// The `(bi, bj)` block of size `block × block`.
    pub fn block(&self, bi: usize, bj: usize, block: usize) -> DenseMatrix {
        DenseMatrix::from_fn(block, block, |i, j| self[(bi * block + i, bj * block + j)])
    }

    /// One-norm, the maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        self.columns().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:>12.6e}", self[(i, j)])).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

fn zip_with(a: &DenseMatrix, b: &DenseMatrix, op: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    DenseMatrix { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(x, y)| op(*x, *y)).collect() }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        zip_with(self, rhs, |a, b| a + b)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        zip_with(self, rhs, |a, b| a - b)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;

    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

/// Panics on shape mismatch; use [`DenseMatrix::matmul`] for a checked product.
impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs).expect("shape mismatch in matrix product")
    }
}

/// A finite real vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::dim("empty vector"));
        }
        check_finite(&entries)?;
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn max_abs_diff(&self, other: &DenseVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        DenseVector::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

impl std::ops::Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseVector{:?}", self.0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Stacks the columns of a square matrix: `vec(U) = (u₁ᵗ, …, u_nᵗ)ᵗ`.
pub fn vec(m: &DenseMatrix) -> Result<DenseVector> {
    if !m.is_square() {
        return Err(Error::dim(format!("vec expects a square matrix, got {}x{}", m.rows, m.cols)));
    }
    Ok(DenseVector(m.data.clone()))
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], n: usize) -> Result<DenseMatrix> {
    if n == 0 || v.len() != n * n {
        return Err(Error::dim(format!("unvec: length {} is not {n}²", v.len())));
    }
    DenseMatrix::new(n, n, v.to_vec())
}

/// Gram matrix with entry `(i, j) = ⟨cols[j], rows[i]⟩`.
pub fn gram<R: AsRef<[f64]>, C: AsRef<[f64]>>(rows: &[R], cols: &[C]) -> Result<DenseMatrix> {
    let dim = rows
        .first()
        .map(|r| r.as_ref().len())
        .or_else(|| cols.first().map(|c| c.as_ref().len()))
        .ok_or_else(|| Error::dim("gram of empty lists"))?;
    if rows.iter().any(|r| r.as_ref().len() != dim) || cols.iter().any(|c| c.as_ref().len() != dim) {
        return Err(Error::dim("gram: vectors of mixed dimensions"));
    }
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::dim("gram of empty lists"));
    }
    Ok(DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| dot(cols[j].as_ref(), rows[i].as_ref())))
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!("cholesky of a {}x{} matrix", a.rows, a.cols)));
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        if a.asymmetry() > 1e-10 * scale {
            return Err(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN });
        }
        let n = a.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_matrix(&self) -> &DenseMatrix {
        &self.l
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows != self.l.rows {
            return Err(Error::dim(format!("solve: {} rows against a {}x{} system", b.rows, self.l.rows, self.l.rows)));
        }
        let mut x = b.clone();
        for j in 0..x.cols {
            let n = x.rows;
            self.solve_in_place(&mut x.data[j * n..(j + 1) * n]);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.l.rows;
        self.solve(&DenseMatrix::identity(n)).expect("square by construction")
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::factor(a)?.solve(b)
}

/// One-norm condition number of an SPD matrix, `‖A‖₁ ‖A⁻¹‖₁`.
pub fn spd_condition(a: &DenseMatrix) -> Result<f64> {
    let chol = Cholesky::factor(a)?;
    Ok(a.norm_one() * chol.inverse().norm_one())
}

/// Left Moore-Penrose inverse `T⁺ = (TᵗT)⁻¹Tᵗ` of a full-column-rank `T`.
pub fn left_moore_penrose(t: &DenseMatrix) -> Result<DenseMatrix> {
    left_moore_penrose_with(t, DEFAULT_RCOND).map(|(p, _)| p)
}

/// As [`left_moore_penrose`], with an explicit threshold; also returns the
/// condition estimate of `TᵗT`.
///
/// Computed as `R⁻¹Qᵗ` from a Householder factorization `T = QR`, which is
/// the same matrix as `(TᵗT)⁻¹Tᵗ` without squaring the condition number.
pub fn left_moore_penrose_with(t: &DenseMatrix, rcond: f64) -> Result<(DenseMatrix, f64)> {
    let (m, r) = t.shape();
    if r > m {
        return Err(Error::dim(format!("left inverse of a wide {m}x{r} matrix")));
    }
    let limit = 1.0 / rcond;
    let (reflectors, upper) = householder_qr(t);
    let scale = upper.max_abs();
    if (0..r).any(|k| !(upper[(k, k)].abs() > f64::EPSILON * scale)) {
        return Err(Error::Singular { condition: f64::INFINITY, limit });
    }
    let r_inv = back_substitute(&upper, &DenseMatrix::identity(r));
    let gram_inv = &r_inv * &r_inv.transpose();
    let condition = (&t.transpose() * t).norm_one() * gram_inv.norm_one();
    if !(condition <= limit) {
        return Err(Error::Singular { condition, limit });
    }
    // Qᵗ restricted to its first r rows: apply H_r⋯H_1 to the identity.
    let mut qt = DenseMatrix::identity(m);
    for (k, v) in reflectors.iter().enumerate() {
        reflect(&mut qt, v, k, 0);
    }
    let qt_thin = DenseMatrix::from_fn(r, m, |i, j| qt[(i, j)]);
    Ok((back_substitute(&upper, &qt_thin), condition))
}

/// Applies `I − 2vvᵗ/vᵗv` (acting on rows `k..`) to columns `from..` of `a`.
fn reflect(a: &mut DenseMatrix, v: &[f64], k: usize, from: usize) {
    let vv = dot(v, v);
    if vv == 0.0 {
        return;
    }
    for j in from..a.cols {
        let col = &mut a.data[j * a.rows + k..(j + 1) * a.rows];
        let c = 2.0 * dot(v, col) / vv;
        for (x, vi) in col.iter_mut().zip(v) {
            *x -= c * vi;
        }
    }
}

/// Householder reflectors and the r×r upper factor of a tall matrix.
fn householder_qr(t: &DenseMatrix) -> (Vec<Vec<f64>>, DenseMatrix) {
    let (m, r) = t.shape();
    let mut a = t.clone();
    let mut reflectors = Vec::with_capacity(r);
    for k in 0..r {
        let mut v: Vec<f64> = a.data[k * m + k..(k + 1) * m].to_vec();
        let alpha = -v[0].signum() * norm(&v);
        v[0] -= alpha;
        reflect(&mut a, &v, k, k);
        reflectors.push(v);
    }
    let upper = DenseMatrix::from_fn(r, r, |i, j| if i <= j { a[(i, j)] } else { 0.0 });
    (reflectors, upper)
}

/// Solves `U X = B` for upper-triangular `U`.
fn back_substitute(u: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let r = u.rows;
    let mut x = b.clone();
    for j in 0..b.cols {
        for i in (0..r).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..r {
                s -= u[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / u[(i, i)];
        }
    }
    x
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Returns the orthonormal factor `Q` and the diagonal of `R`. A column whose
/// residual norm falls below `tol` times its original norm is rank deficient.
pub fn orthonormalize_columns(m: &DenseMatrix, tol: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m.cols);
    let mut rdiag = Vec::with_capacity(m.cols);
    for col in m.columns() {
        let mut v = col.to_vec();
        let original = norm(&v);
        for _ in 0..2 {
            for qk in &q {
                let c = dot(qk, &v);
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
            }
        }
        let r = norm(&v);
        if !(r > tol * original) || r == 0.0 {
            return Err(Error::Singular { condition: f64::INFINITY, limit: 1.0 / tol });
        }
        v.iter_mut().for_each(|x| *x /= r);
        q.push(v);
        rdiag.push(r);
    }
    Ok((DenseMatrix::from_columns(&q)?, rdiag))
}
