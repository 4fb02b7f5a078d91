//! Indicator-matrix subproblem: `min Tr(FᵀQF - 2FᵀC)` over `FᵀF = I`,
//! solved by generalized power iteration.
//!
//! With `ν > λ_max(Q)` and `Q̃ = νI - Q` positive definite, each step
//! `F ← procrustes(2Q̃F + 2C)` never increases the objective.

use alloc::vec::Vec;

use crate::error::{Error, Result, Warning};
use crate::graph::GraphLaplacian;
use crate::matrix::{orthogonal_procrustes, orthogonality_residual, spectral_upper_bound, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FSolverConfig {
    pub alpha: f64,
    pub max_inner_iters: usize,
    pub tol: f64,
}

impl Default for FSolverConfig {
    fn default() -> Self {
        FSolverConfig {
            alpha: 1.0,
            max_inner_iters: 50,
            tol: 1e-8,
        }
    }
}

/// `Q = (α/2)L + H` and `C = H Xᵀ W` (the rows of `Xcᵀ W`).
pub fn build_qc(
    xc: &DenseMatrix,
    w: &DenseMatrix,
    lap: &GraphLaplacian,
    alpha: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = xc.cols();
    if lap.laplacian.rows() != n || w.rows() != xc.rows() {
        return Err(Error::ShapeMismatch {
            expected: (xc.rows(), n),
            found: w.shape(),
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut q = lap.laplacian.scale(0.5 * alpha);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] += if i == j { 1.0 - inv_n } else { -inv_n };
        }
    }
    crate::matrix::symmetrize(&mut q);
    // Xc already has zero row means, so Xcᵀ W has zero column sums.
    let c = xc.t_matmul(w);
    Ok((q, c))
}

/// `Tr(FᵀQF) - 2 Tr(FᵀC)`.
pub fn objective_f(q: &DenseMatrix, c: &DenseMatrix, f: &DenseMatrix) -> f64 {
    f.frobenius_dot(&q.matmul(f)) - 2.0 * f.frobenius_dot(c)
}

#[derive(Debug, Clone)]
pub struct FSolution {
    pub f: DenseMatrix,
    pub nu: f64,
    /// Objective after each update, preceded by the value at `F_init`.
    pub objectives: Vec<f64>,
    /// `‖FᵀF - I‖_F` after each update.
    pub residuals: Vec<f64>,
    pub warnings: Vec<Warning>,
}

pub fn solve_f(
    q: &DenseMatrix,
    c: &DenseMatrix,
    f_init: &DenseMatrix,
    cfg: &FSolverConfig,
) -> Result<FSolution> {
    let nu = spectral_upper_bound(q)?;
    solve_f_with_shift(q, c, f_init, cfg, nu)
}

/// Generalized power iteration with an explicit shift `nu`, which must
/// exceed the largest eigenvalue of `q`.
pub fn solve_f_with_shift(
    q: &DenseMatrix,
    c: &DenseMatrix,
    f_init: &DenseMatrix,
    cfg: &FSolverConfig,
    nu: f64,
) -> Result<FSolution> {
    let n = q.rows();
    if q.cols() != n || c.rows() != n || f_init.shape() != c.shape() {
        return Err(Error::ShapeMismatch {
            expected: (n, c.cols()),
            found: f_init.shape(),
        });
    }
    if cfg.max_inner_iters == 0 {
        return Err(Error::InvalidParameter {
            name: "max_inner_iters",
            reason: "must be at least 1",
        });
    }
    let mut q_tilde = q.scale(-1.0);
    for i in 0..n {
        q_tilde[(i, i)] += nu;
    }

    let mut f = f_init.clone();
    let mut objectives = Vec::with_capacity(cfg.max_inner_iters + 1);
    let mut residuals = Vec::with_capacity(cfg.max_inner_iters);
    let mut warnings = Vec::new();
    objectives.push(objective_f(q, c, &f));

    for _ in 0..cfg.max_inner_iters {
        let mut e = q_tilde.matmul(&f);
        e.add_scaled_assign(1.0, c);
        let e = e.scale(2.0);
        let p = orthogonal_procrustes(&e)?;
        if let Some(wn) = p.warning {
            if !warnings.contains(&wn) {
                warnings.push(wn);
            }
        }
        f = p.matrix;
        residuals.push(orthogonality_residual(&f, None));
        let prev = *objectives.last().expect("non-empty");
        let obj = objective_f(q, c, &f);
        objectives.push(obj);
        if (prev - obj).abs() <= cfg.tol * prev.abs().max(1.0) {
            break;
        }
    }
    Ok(FSolution {
        f,
        nu,
        objectives,
        residuals,
        warnings,
    })
}
