//! Projection-matrix subproblem under the extended uncorrelated constraint.
//!
//! For fixed `F` and `S`, solves
//!
//! ```text
//! min_W ‖H(XᵀW - F)‖² + λ‖W‖₂,₁ + α Tr(Wᵀ X L Xᵀ W)   s.t.  Wᵀ R W = I
//! R = X H Xᵀ + λ D_w + α X L Xᵀ
//! ```
//!
//! by iterating: build `R` from the current reweighting `D_w`, take
//! `W = R^{-1/2} · procrustes(R^{-1/2} X H F)`, then refresh `D_w` from `W`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result, Warning};
use crate::graph::GraphLaplacian;
use crate::matrix::{
    l21_norm, orthogonal_procrustes, orthogonality_residual, reweight_diag, spd_inverse_sqrt,
    DenseMatrix, DEFAULT_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WSolverConfig {
    /// Weight of the l2,1 penalty (also scales `D_w` inside the constraint).
    pub lambda: f64,
    /// Weight of the graph term (also scales `X L Xᵀ` inside the constraint).
    pub alpha: f64,
    pub epsilon: f64,
    pub max_inner_iters: usize,
    /// Relative objective change below which the inner loop stops.
    pub tol: f64,
}

impl Default for WSolverConfig {
    fn default() -> Self {
        WSolverConfig {
            lambda: 1.0,
            alpha: 1.0,
            epsilon: DEFAULT_EPSILON,
            max_inner_iters: 20,
            tol: 1e-6,
        }
    }
}

impl WSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "must be positive and finite",
            });
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: "must be non-negative and finite",
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: "must be positive",
            });
        }
        if self.max_inner_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_inner_iters",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// Fixed data-dependent pieces of the W-step: `X H Xᵀ` and `X L Xᵀ`.
#[derive(Debug, Clone)]
pub struct ScatterTerms {
    pub total: DenseMatrix,
    pub graph: DenseMatrix,
}

impl ScatterTerms {
    pub fn new(xc: &DenseMatrix, lap: &GraphLaplacian) -> Result<Self> {
        check_laplacian(xc, lap)?;
        Ok(ScatterTerms {
            total: xc.matmul_t(xc),
            graph: xc.matmul(&lap.laplacian).matmul_t(xc),
        })
    }

    /// Uses a precomputed `X L Xᵀ` (e.g. from [`crate::graph::graph_scatter`]).
    pub fn with_graph_scatter(xc: &DenseMatrix, graph: DenseMatrix) -> Self {
        ScatterTerms {
            total: xc.matmul_t(xc),
            graph,
        }
    }
}

fn check_laplacian(xc: &DenseMatrix, lap: &GraphLaplacian) -> Result<()> {
    if lap.laplacian.rows() != xc.cols() {
        return Err(Error::ShapeMismatch {
            expected: (xc.cols(), xc.cols()),
            found: lap.laplacian.shape(),
        });
    }
    Ok(())
}

/// `R = X H Xᵀ + λ D_w + α X L Xᵀ` for a centered `xc` and the diagonal of `D_w`.
pub fn build_rt_prime(
    xc: &DenseMatrix,
    dw: &[f64],
    lap: &GraphLaplacian,
    cfg: &WSolverConfig,
) -> Result<DenseMatrix> {
    let scatter = ScatterTerms::new(xc, lap)?;
    rt_prime_from_scatter(&scatter, dw, cfg)
}

pub fn rt_prime_from_scatter(
    scatter: &ScatterTerms,
    dw: &[f64],
    cfg: &WSolverConfig,
) -> Result<DenseMatrix> {
    let d = scatter.total.rows();
    if dw.len() != d {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            found: (dw.len(), dw.len()),
        });
    }
    let mut r = scatter.total.clone();
    if cfg.alpha != 0.0 {
        r.add_scaled_assign(cfg.alpha, &scatter.graph);
    }
    for (i, &v) in dw.iter().enumerate() {
        r[(i, i)] += cfg.lambda * v;
    }
    if !r.is_finite() {
        return Err(Error::NumericOverflow("constraint matrix"));
    }
    crate::matrix::symmetrize(&mut r);
    Ok(r)
}

/// Value of the W-subproblem objective
/// `‖XcᵀW - HF‖² + λ‖W‖₂,₁ + α Tr(Wᵀ Xc L Xcᵀ W)`.
pub fn objective_w(
    xc: &DenseMatrix,
    w: &DenseMatrix,
    f: &DenseMatrix,
    lap: &GraphLaplacian,
    cfg: &WSolverConfig,
) -> Result<f64> {
    check_laplacian(xc, lap)?;
    let proj = xc.t_matmul(w);
    let graph = if cfg.alpha != 0.0 {
        cfg.alpha * lap.quadratic_form(&proj)
    } else {
        0.0
    };
    Ok(regression_residual(&proj, f) + cfg.lambda * l21_norm(w) + graph)
}

/// `‖P - H F‖²` where `P = Xcᵀ W` already has zero column means.
pub(crate) fn regression_residual(proj: &DenseMatrix, f: &DenseMatrix) -> f64 {
    let n = f.rows() as f64;
    let means: Vec<f64> = f.column_sums().into_iter().map(|s| s / n).collect();
    let mut total = 0.0;
    for i in 0..f.rows() {
        for ((&p, &fv), &m) in proj.row(i).iter().zip(f.row(i)).zip(&means) {
            let r = p - (fv - m);
            total += r * r;
        }
    }
    total
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InnerTrace {
    pub objectives: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct WSolution {
    pub w: DenseMatrix,
    /// Reweighting refreshed from the returned `w`, for warm starts.
    pub dw: Vec<f64>,
    /// Constraint matrix the returned `w` satisfies.
    pub rt_prime: DenseMatrix,
    /// `‖Wᵀ R W - I‖_F` for the returned `w`.
    pub residual: f64,
    pub trace: InnerTrace,
    pub warnings: Vec<Warning>,
}

/// Solves the W-subproblem. `dw_init` defaults to the identity reweighting.
pub fn solve_w(
    xc: &DenseMatrix,
    f: &DenseMatrix,
    lap: &GraphLaplacian,
    cfg: &WSolverConfig,
    dw_init: Option<&[f64]>,
) -> Result<WSolution> {
    let scatter = ScatterTerms::new(xc, lap)?;
    solve_w_with(xc, f, lap, &scatter, cfg, dw_init)
}

/// Like [`solve_w`] with the scatter terms supplied by the caller.
pub fn solve_w_with(
    xc: &DenseMatrix,
    f: &DenseMatrix,
    lap: &GraphLaplacian,
    scatter: &ScatterTerms,
    cfg: &WSolverConfig,
    dw_init: Option<&[f64]>,
) -> Result<WSolution> {
    cfg.validate()?;
    let (d, n) = xc.shape();
    if f.rows() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, f.cols()),
            found: f.shape(),
        });
    }
    if f.cols() > d {
        return Err(Error::InvalidInput("embedding width exceeds feature count"));
    }
    let xhf = xc.matmul(f);
    let mut dw = match dw_init {
        Some(v) => v.to_vec(),
        None => vec![1.0; d],
    };
    let mut trace = InnerTrace::default();
    let mut warnings = Vec::new();
    let mut last: Option<(DenseMatrix, DenseMatrix, f64)> = None;

    for _ in 0..cfg.max_inner_iters {
        let rt = rt_prime_from_scatter(scatter, &dw, cfg)?;
        let (inv_sqrt, _) = spd_inverse_sqrt(&rt)?;
        let b = inv_sqrt.matmul(&xhf);
        let procrustes = orthogonal_procrustes(&b)?;
        if let Some(wn) = procrustes.warning {
            if !warnings.contains(&wn) {
                warnings.push(wn);
            }
        }
        let w = inv_sqrt.matmul(&procrustes.matrix);
        if !w.is_finite() {
            return Err(Error::NumericOverflow("projection matrix"));
        }
        let residual = orthogonality_residual(&w, Some(&rt));
        let obj = objective_w(xc, &w, f, lap, cfg)?;
        dw = reweight_diag(&w, cfg.epsilon)?;

        let prev = trace.objectives.last().copied();
        trace.objectives.push(obj);
        trace.residuals.push(residual);
        last = Some((w, rt, residual));
        if let Some(p) = prev {
            if (p - obj).abs() <= cfg.tol * p.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    let (w, rt_prime, residual) = last.expect("at least one inner iteration");
    Ok(WSolution {
        w,
        dw,
        rt_prime,
        residual,
        trace,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, combined_affinity_cost, learn_graph, pairwise_projected_distances};
    use crate::matrix::{center_columns, random_orthonormal, symmetric_eigen};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        xc: DenseMatrix,
        f: DenseMatrix,
        lap: GraphLaplacian,
    }

    fn instance(d: usize, n: usize, c: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DenseMatrix::gaussian(d, n, &mut rng);
        let xc = center_columns(&x).unwrap();
        let f = random_orthonormal(n, c, &mut rng).unwrap();
        let w0 = random_orthonormal(d, c, &mut rng).unwrap();
        let dist = pairwise_projected_distances(&xc, &w0).unwrap();
        let g = combined_affinity_cost(&dist, &f).unwrap();
        let (s, _) = learn_graph(&g, 5).unwrap();
        Instance {
            xc,
            f,
            lap: build_laplacian(&s),
        }
    }

    #[test]
    fn rt_prime_identity_case() {
        let xc = DenseMatrix::zeros(3, 4);
        let lap = build_laplacian(
            &crate::graph::SimilarityGraph::from_rows(
                1,
                vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![(3, 1.0)], vec![(2, 1.0)]],
            )
            .unwrap(),
        );
        let cfg = WSolverConfig {
            lambda: 1.0,
            alpha: 0.0,
            ..Default::default()
        };
        let r = build_rt_prime(&xc, &[1.0; 3], &lap, &cfg).unwrap();
        assert_eq!(r, DenseMatrix::identity(3));
    }

    #[test]
    fn rt_prime_alpha_zero_drops_graph_term() {
        let inst = instance(6, 12, 2, 1);
        let dw = [0.3, 1.0, 2.0, 0.5, 0.7, 1.1];
        let cfg = WSolverConfig {
            lambda: 2.0,
            alpha: 0.0,
            ..Default::default()
        };
        let r = build_rt_prime(&inst.xc, &dw, &inst.lap, &cfg).unwrap();
        let mut expected = inst.xc.matmul_t(&inst.xc);
        for (i, v) in dw.iter().enumerate() {
            expected[(i, i)] += 2.0 * v;
        }
        for (a, b) in r.as_slice().iter().zip(expected.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rt_prime_is_spd() {
        let inst = instance(10, 8, 2, 2);
        let cfg = WSolverConfig::default();
        let r = build_rt_prime(&inst.xc, &[1.0; 10], &inst.lap, &cfg).unwrap();
        assert!(r.asymmetry() <= 1e-12);
        let (vals, _) = symmetric_eigen(&r);
        assert!(*vals.last().unwrap() > 0.0);
    }

    #[test]
    fn objective_examples() {
        let inst = instance(5, 9, 2, 3);
        let cfg = WSolverConfig::default();
        let w0 = DenseMatrix::zeros(5, 2);
        let hf = center_columns(&inst.f.transpose()).unwrap();
        let expected = hf.frobenius_norm().powi(2);
        assert_abs_diff_eq!(
            objective_w(&inst.xc, &w0, &inst.f, &inst.lap, &cfg).unwrap(),
            expected,
            epsilon = 1e-12
        );

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = DenseMatrix::gaussian(5, 2, &mut rng);
        let base = objective_w(&inst.xc, &w, &inst.f, &inst.lap, &cfg).unwrap();
        let doubled = WSolverConfig {
            lambda: 2.0 * cfg.lambda,
            ..cfg
        };
        let twice = objective_w(&inst.xc, &w, &inst.f, &inst.lap, &doubled).unwrap();
        assert_abs_diff_eq!(twice - base, cfg.lambda * l21_norm(&w), epsilon = 1e-10);
    }

    #[test]
    fn graph_term_matches_pair_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = center_columns(&DenseMatrix::gaussian(4, 10, &mut rng)).unwrap();
        let f = random_orthonormal(10, 2, &mut rng).unwrap();
        let w = DenseMatrix::gaussian(4, 2, &mut rng);
        let g = DenseMatrix::gaussian(10, 10, &mut rng).map(|v| v.abs());
        let (s, _) = learn_graph(&g, 3).unwrap();
        let lap = build_laplacian(&s);
        let on = WSolverConfig {
            alpha: 0.7,
            ..Default::default()
        };
        let off = WSolverConfig { alpha: 0.0, ..on };
        let graph_term = objective_w(&x, &w, &f, &lap, &on).unwrap() - objective_w(&x, &w, &f, &lap, &off).unwrap();
        let dist = pairwise_projected_distances(&x, &w).unwrap();
        let dense = s.to_dense();
        let mut pair_sum = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                pair_sum += dist[(i, j)] * dense[(i, j)];
            }
        }
        assert_abs_diff_eq!(graph_term, 0.5 * 0.7 * pair_sum, epsilon = 1e-10);
    }

    #[test]
    fn single_iteration_reaches_procrustes_optimum() {
        let inst = instance(30, 50, 3, 6);
        let cfg = WSolverConfig {
            max_inner_iters: 1,
            ..Default::default()
        };
        let sol = solve_w(&inst.xc, &inst.f, &inst.lap, &cfg, None).unwrap();
        let rt = build_rt_prime(&inst.xc, &[1.0; 30], &inst.lap, &cfg).unwrap();
        let (inv_sqrt, _) = spd_inverse_sqrt(&rt).unwrap();
        let b = inv_sqrt.matmul(&inst.xc.matmul(&inst.f));
        let (sv, _) = symmetric_eigen(&b.t_matmul(&b));
        let nuclear: f64 = sv.iter().map(|v| v.max(0.0).sqrt()).sum();
        let achieved = sol.w.frobenius_dot(&inst.xc.matmul(&inst.f));
        assert!((achieved - nuclear).abs() <= 1e-8 * nuclear);
        assert!(sol.residual <= 1e-6);
    }

    #[test]
    fn inner_objective_non_increasing() {
        for seed in 0..20 {
            let inst = instance(30, 50, 3, 100 + seed);
            let cfg = WSolverConfig {
                max_inner_iters: 10,
                tol: 0.0,
                ..Default::default()
            };
            let sol = solve_w(&inst.xc, &inst.f, &inst.lap, &cfg, None).unwrap();
            assert_eq!(sol.trace.objectives.len(), 10);
            for pair in sol.trace.objectives.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs(), "seed {seed}: {:?}", sol.trace.objectives);
            }
            assert!(sol.trace.residuals.iter().all(|&r| r <= 1e-6));
        }
    }

    #[test]
    fn uncoupled_case_warns() {
        let inst = instance(6, 10, 2, 7);
        // the constant column is annihilated by centering, so Xc·F has rank 1
        let f = DenseMatrix::from_fn(10, 2, |i, j| match j {
            0 => 1.0 / 10f64.sqrt(),
            _ => (if i < 5 { 1.0 } else { -1.0 }) / 10f64.sqrt(),
        });
        assert!(orthogonality_residual(&f, None) < 1e-12);
        let sol = solve_w(&inst.xc, &f, &inst.lap, &WSolverConfig::default(), None).unwrap();
        assert!(sol.warnings.contains(&Warning::RankDeficientProcrustes));
        assert!(sol.residual <= 1e-6);
    }

    #[test]
    fn alpha_zero_fixed_point_satisfies_plain_constraint() {
        let inst = instance(8, 20, 2, 8);
        let cfg = WSolverConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let sol = solve_w(&inst.xc, &inst.f, &inst.lap, &cfg, None).unwrap();
        // R - X H Xᵀ must be the purely diagonal λ·D_w term
        let extra = sol.rt_prime.sub(&inst.xc.matmul_t(&inst.xc));
        for i in 0..8 {
            assert!(extra[(i, i)] > 0.0);
            for j in 0..8 {
                if i != j {
                    assert!(extra[(i, j)].abs() < 1e-10);
                }
            }
        }
        assert!(sol.residual <= 1e-6);
    }

    #[test]
    fn larger_lambda_shrinks_l21() {
        let mut wins = 0;
        for seed in 0..10 {
            let inst = instance(15, 30, 2, 200 + seed);
            let norms: Vec<f64> = [0.01, 1.0, 100.0]
                .iter()
                .map(|&lambda| {
                    let cfg = WSolverConfig {
                        lambda,
                        ..Default::default()
                    };
                    l21_norm(&solve_w(&inst.xc, &inst.f, &inst.lap, &cfg, None).unwrap().w)
                })
                .collect();
            if norms[0] > norms[1] && norms[1] > norms[2] {
                wins += 1;
            }
        }
        assert!(wins > 5, "only {wins}/10 seeds shrank");
    }
}
