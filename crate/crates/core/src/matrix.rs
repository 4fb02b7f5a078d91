//! Dense-matrix primitives shared by the solvers.
//!
//! Storage is row-major `f64`. Only the handful of operations the solvers
//! need are provided here; eigen- and singular-value decompositions are
//! delegated to `nalgebra`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

// libm-backed float methods; std shadows them when linked in tests
#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result, Warning};

/// Default smoothing constant for the l2,1 reweighting.
pub const DEFAULT_EPSILON: f64 = 1e-6;

const SYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_EIG_TOL: f64 = 1e-6;
const EIG_FLOOR: f64 = 1e-12;

const POWER_MAX_STEPS: usize = 100;
const POWER_TOL: f64 = 1e-9;
const POWER_MARGIN: f64 = 1.01;
const POWER_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput("entry count does not match rows x cols"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged rows"));
        }
        DenseMatrix::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Matrix of independent standard-normal draws.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "t_matmul row mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let rhs = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_t column mismatch");
        Self::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self += s * other`.
    pub fn add_scaled_assign(&mut self, s: f64, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `Tr(selfᵀ other)`, the Frobenius inner product.
    pub fn frobenius_dot(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        dot(&self.data, &other.data)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Largest absolute difference between `self` and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Copies the selected columns into a new matrix.
    pub fn select_columns(&self, cols: &[usize]) -> DenseMatrix {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subtracts each row's mean, i.e. computes `X·H` with `H = I - (1/n)·11ᵀ`
/// for a features-by-samples matrix without forming `H`.
pub fn center_columns(x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::InvalidInput("cannot center an empty matrix"));
    }
    let mut out = x.clone();
    let n = x.cols() as f64;
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / n;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(out)
}

/// Sum of the Euclidean norms of the rows.
pub fn l21_norm(w: &DenseMatrix) -> f64 {
    w.row_norms().iter().sum()
}

/// Diagonal of the smoothed l2,1 reweighting matrix,
/// `1 / (2·sqrt(‖wⁱ‖² + ε))` per row.
pub fn reweight_diag(w: &DenseMatrix, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: "must be positive",
        });
    }
    Ok((0..w.rows())
        .map(|i| {
            let sq: f64 = w.row(i).iter().map(|v| v * v).sum();
            0.5 / (sq + epsilon).sqrt()
        })
        .collect())
}

/// Eigendecomposition of a symmetric positive semidefinite matrix, with
/// eigenvalues sorted in descending order and floored at a small positive
/// fraction of the largest one.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors stored as columns, aligned with `eigenvalues`.
    pub eigenvectors: DenseMatrix,
}

impl SpdFactorization {
    pub fn of(m: &DenseMatrix) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols || rows == 0 {
            return Err(Error::InvalidInput("expected a non-empty square matrix"));
        }
        let asym = m.asymmetry();
        if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let (values, vectors) = symmetric_eigen(m);
        let largest = values.first().copied().unwrap_or(0.0);
        let norm = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let smallest = values.last().copied().unwrap_or(0.0);
        if !(largest > 0.0) || smallest < -NEGATIVE_EIG_TOL * norm {
            return Err(Error::NotPositiveDefinite(smallest));
        }
        let floor = EIG_FLOOR * largest;
        Ok(SpdFactorization {
            eigenvalues: values.into_iter().map(|v| v.max(floor)).collect(),
            eigenvectors: vectors,
        })
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let v = &self.eigenvectors;
        let scaled = DenseMatrix::from_fn(v.rows(), v.cols(), |i, j| {
            v[(i, j)] * f(self.eigenvalues[j])
        });
        let mut out = scaled.matmul_t(v);
        symmetrize(&mut out);
        out
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and the
/// eigenvectors as matching columns.
pub fn symmetric_eigen(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let eig = m.to_nalgebra().symmetric_eigen();
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub(crate) fn symmetrize(m: &mut DenseMatrix) {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Inverse square root `M^{-1/2}` of a symmetric positive definite matrix.
pub fn spd_inverse_sqrt(m: &DenseMatrix) -> Result<(DenseMatrix, SpdFactorization)> {
    let fact = SpdFactorization::of(m)?;
    let r = fact.apply_spectral(|l| 1.0 / l.sqrt());
    Ok((r, fact))
}

/// Solution of `max Tr(Aᵀ B)` subject to `Aᵀ A = I`.
#[derive(Debug, Clone)]
pub struct Procrustes {
    pub matrix: DenseMatrix,
    /// Sum of the singular values of the input, the optimal trace value.
    pub nuclear_norm: f64,
    pub warning: Option<Warning>,
}

/// Orthogonal Procrustes via the compact SVD `B = U Σ Vᵀ`, returning `U Vᵀ`.
///
/// Each column of `U` is sign-fixed so its largest-magnitude entry is
/// positive (with the matching column of `V` flipped alongside). This only
/// affects the output when `B` is rank deficient.
pub fn orthogonal_procrustes(b: &DenseMatrix) -> Result<Procrustes> {
    let (p, c) = b.shape();
    if c == 0 || p < c {
        return Err(Error::InvalidInput("Procrustes needs rows >= cols >= 1"));
    }
    if !b.is_finite() {
        return Err(Error::NumericOverflow("Procrustes input"));
    }
    let svd = b.to_nalgebra().svd(true, true);
    let mut u = DenseMatrix::from_nalgebra(svd.u.as_ref().expect("requested U"));
    let mut vt = DenseMatrix::from_nalgebra(svd.v_t.as_ref().expect("requested Vᵀ"));
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    for j in 0..c {
        let mut pivot = 0.0_f64;
        for i in 0..p {
            if u[(i, j)].abs() > pivot.abs() {
                pivot = u[(i, j)];
            }
        }
        if pivot < 0.0 {
            for i in 0..p {
                u[(i, j)] = -u[(i, j)];
            }
            vt.row_mut(j).iter_mut().for_each(|v| *v = -*v);
        }
    }

    let s_max = sigma.iter().fold(0.0_f64, |m, &s| m.max(s));
    let s_min = sigma.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    let rank_tol = (p.max(c) as f64) * f64::EPSILON * s_max;
    let warning = if s_max == 0.0 || s_min <= rank_tol {
        log::warn!("orthogonal Procrustes input is rank deficient");
        Some(Warning::RankDeficientProcrustes)
    } else {
        None
    };

    Ok(Procrustes {
        matrix: u.matmul(&vt),
        nuclear_norm: sigma.iter().sum(),
        warning,
    })
}

/// An upper bound `ν > λ_max(Q)` for a symmetric `Q`, from power iteration
/// with a relative safety margin.
///
/// Falls back to `‖Q‖_F + 1` when the iteration does not settle.
pub fn spectral_upper_bound(q: &DenseMatrix) -> Result<f64> {
    let n = q.rows();
    if n == 0 || q.cols() != n {
        return Err(Error::InvalidInput("expected a non-empty square matrix"));
    }
    // Deterministic start vector with no exact symmetry.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0)).collect();
    normalize(&mut v);
    let mut estimate = 0.0_f64;
    let mut converged = false;
    for step in 0..POWER_MAX_STEPS {
        let qv: Vec<f64> = (0..n).map(|i| dot(q.row(i), &v)).collect();
        let rayleigh = dot(&v, &qv);
        let norm = qv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            estimate = 0.0;
            converged = true;
            break;
        }
        let delta = (rayleigh - estimate).abs();
        estimate = rayleigh;
        v = qv.into_iter().map(|x| x / norm).collect();
        if step > 0 && delta <= POWER_TOL * estimate.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if converged {
        Ok(POWER_MARGIN * estimate.abs() + POWER_OFFSET)
    } else {
        Ok(q.frobenius_norm() + 1.0)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Orthonormal `rows × cols` matrix from the QR factorization of a seeded
/// Gaussian draw.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<DenseMatrix> {
    if cols == 0 || rows < cols {
        return Err(Error::InvalidInput("orthonormal draw needs rows >= cols >= 1"));
    }
    let g = DenseMatrix::gaussian(rows, cols, rng);
    let qr = g.to_nalgebra().qr();
    let q = qr.q();
    let r = qr.r();
    // Fix signs so the factor is unique (positive diagonal of R).
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| {
        if r[(j, j)] < 0.0 {
            -q[(i, j)]
        } else {
            q[(i, j)]
        }
    }))
}

/// `‖Aᵀ M A - I‖_F`, or `‖Aᵀ A - I‖_F` when `m` is `None`.
pub fn orthogonality_residual(a: &DenseMatrix, m: Option<&DenseMatrix>) -> f64 {
    let gram = match m {
        Some(m) => a.t_matmul(&m.matmul(a)),
        None => a.t_matmul(a),
    };
    gram.sub(&DenseMatrix::identity(a.cols())).frobenius_norm()
}
