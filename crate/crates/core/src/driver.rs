//! Outer alternating loop over `W`, `F` and `S`, global objective tracking
//! and feature ranking.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, Warning};
use crate::fsolver::{build_qc, solve_f, FSolverConfig};
use crate::graph::{
    build_laplacian, combined_affinity_cost, graph_scatter, graph_smoothness, learn_graph,
    pairwise_projected_distances, SimilarityGraph,
};
use crate::matrix::{
    center_columns, l21_norm, orthogonality_residual, random_orthonormal, DenseMatrix,
    DEFAULT_EPSILON,
};
use crate::wsolver::{regression_residual, solve_w_with, ScatterTerms, WSolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgufsConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Neighbors kept per row of the similarity graph.
    pub k: usize,
    /// Number of clusters, i.e. the width of `W` and `F`.
    pub c: usize,
    /// Number of features to select.
    pub top_t: usize,
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub outer_tol: f64,
    pub seed: u64,
    pub w_max_inner_iters: usize,
    pub w_tol: f64,
    pub f_max_inner_iters: usize,
    pub f_tol: f64,
}

impl Default for AgufsConfig {
    fn default() -> Self {
        AgufsConfig {
            alpha: 1.0,
            lambda: 1.0,
            k: 5,
            c: 3,
            top_t: 10,
            epsilon: DEFAULT_EPSILON,
            max_outer_iters: 30,
            outer_tol: 1e-5,
            seed: 0,
            w_max_inner_iters: 20,
            w_tol: 1e-6,
            f_max_inner_iters: 50,
            f_tol: 1e-8,
        }
    }
}

impl AgufsConfig {
    /// Checks the configuration against a `d × n` data matrix.
    pub fn validate(&self, d: usize, n: usize) -> Result<()> {
        if self.top_t == 0 || self.top_t > d {
            return Err(Error::InvalidParameter {
                name: "top_t",
                reason: "must satisfy 1 <= top_t <= d",
            });
        }
        if self.k == 0 || self.k + 2 > n {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: "must satisfy 1 <= k <= n - 2",
            });
        }
        if self.c < 2 || self.c > n.min(d) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "must satisfy 2 <= c <= min(n, d)",
            });
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_outer_iters",
                reason: "must be at least 1",
            });
        }
        self.w_config().validate()?;
        if self.f_max_inner_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "f_max_inner_iters",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    pub fn w_config(&self) -> WSolverConfig {
        WSolverConfig {
            lambda: self.lambda,
            alpha: self.alpha,
            epsilon: self.epsilon,
            max_inner_iters: self.w_max_inner_iters,
            tol: self.w_tol,
        }
    }

    pub fn f_config(&self) -> FSolverConfig {
        FSolverConfig {
            alpha: self.alpha,
            max_inner_iters: self.f_max_inner_iters,
            tol: self.f_tol,
        }
    }
}

/// The five terms of the global objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectiveTerms {
    /// `‖H(XᵀW - F)‖²`
    pub regression: f64,
    /// `λ‖W‖₂,₁`
    pub sparsity: f64,
    /// `(α/2) Σ_ij ‖Wᵀx_i - Wᵀx_j‖² s_ij`
    pub distance: f64,
    /// `(α/2) Σ_i β_i ‖s_i‖²`
    pub prior: f64,
    /// `(α/2) Tr(Fᵀ L F)`
    pub indicator: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.regression + self.sparsity + self.distance + self.prior + self.indicator
    }
}

/// Global objective with the bias eliminated, using per-row `β_i` in the
/// prior term.
pub fn global_objective(
    xc: &DenseMatrix,
    w: &DenseMatrix,
    f: &DenseMatrix,
    s: &SimilarityGraph,
    betas: &[f64],
    cfg: &AgufsConfig,
) -> Result<ObjectiveTerms> {
    let n = xc.cols();
    if w.rows() != xc.rows() || f.rows() != n || s.n() != n || betas.len() != n {
        return Err(Error::InvalidInput("objective components have inconsistent shapes"));
    }
    let proj = xc.t_matmul(w);
    let half_alpha = 0.5 * cfg.alpha;
    // Tr(FᵀLF) = ½ Σ s_ij ‖fⁱ - fʲ‖²
    let indicator = 0.5 * graph_smoothness(f, s);
    Ok(ObjectiveTerms {
        regression: regression_residual(&proj, f),
        sparsity: cfg.lambda * l21_norm(w),
        distance: half_alpha * graph_smoothness(&proj, s),
        prior: half_alpha * s.weighted_square_norm(betas),
        indicator: half_alpha * indicator,
    })
}

/// Bias `b = (1/n)(Fᵀ - WᵀX)·1`, from the feature means of the raw data
/// and the column means of `F`.
pub fn compute_bias(x_means: &[f64], w: &DenseMatrix, f_means: &[f64]) -> Result<Vec<f64>> {
    if x_means.len() != w.rows() || f_means.len() != w.cols() {
        return Err(Error::InvalidInput("bias inputs have inconsistent shapes"));
    }
    Ok((0..w.cols())
        .map(|j| {
            let proj: f64 = x_means.iter().enumerate().map(|(i, m)| w[(i, j)] * m).sum();
            f_means[j] - proj
        })
        .collect())
}

/// Features ordered by descending `‖wⁱ‖₂`, ties by ascending index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureRanking {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
    pub selected: Vec<usize>,
}

pub fn rank_features(w: &DenseMatrix, top_t: usize) -> FeatureRanking {
    let scores = w.row_norms();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let selected = order[..top_t.min(order.len())].to_vec();
    FeatureRanking {
        scores,
        order,
        selected,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    /// Global objective after this iteration, with this iteration's `β`.
    pub objective: f64,
    /// The previous iterate's objective re-evaluated with this iteration's `β`.
    pub previous_objective_same_beta: f64,
    /// Relative decrease `(previous_objective_same_beta - objective) / |previous|`.
    pub relative_change: f64,
    pub terms: ObjectiveTerms,
    /// `‖Wᵀ R W - I‖_F` after the W-step.
    pub w_residual: f64,
    /// `‖FᵀF - I‖_F` after the F-step.
    pub f_residual: f64,
    /// Largest `|Σ_j s_ij - 1|` after the S-step.
    pub s_row_sum_deviation: f64,
    pub w_inner_objectives: Vec<f64>,
    pub f_inner_objectives: Vec<f64>,
    pub w_step_secs: f64,
    pub f_step_secs: f64,
    pub s_step_secs: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverTrace {
    /// Objective at the initial `(W, F, S)`.
    pub initial_objective: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl SolverTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.objective).collect()
    }

    /// First iteration at which the relative change dropped below `tol`.
    pub fn iterations_to_tolerance(&self, tol: f64) -> Option<usize> {
        self.iterations
            .iter()
            .find(|r| r.relative_change.abs() < tol)
            .map(|r| r.iteration)
    }

    /// Whether every step decreased the objective (compared at a common `β`)
    /// up to a relative `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.iterations
            .iter()
            .all(|r| r.objective <= r.previous_objective_same_beta + slack * r.previous_objective_same_beta.abs())
    }
}

#[derive(Debug, Clone)]
pub struct AgufsOutput {
    pub ranking: FeatureRanking,
    pub w: DenseMatrix,
    pub f: DenseMatrix,
    pub graph: SimilarityGraph,
    pub betas: Vec<f64>,
    /// Bias of the regression, `b = (1/n)(Fᵀ - WᵀX)·1`.
    pub bias: Vec<f64>,
    pub trace: SolverTrace,
    pub warnings: Vec<Warning>,
}

/// Optional hooks for [`run_agufs_with`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Replaces the seeded random initial `F` (must be `n × c` orthonormal).
    pub initial_indicator: Option<DenseMatrix>,
    /// Monotonic clock in seconds, used to fill the timing fields of the trace.
    pub clock: Option<&'a dyn Fn() -> f64>,
    /// Called once per outer iteration, after the similarity update.
    pub observer: Option<&'a mut dyn FnMut(&IterationState<'_>)>,
}

/// Solver state at the end of an outer iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationState<'s> {
    pub iteration: usize,
    pub w: &'s DenseMatrix,
    /// The `R_t′` that `w` was computed against.
    pub rt_prime: &'s DenseMatrix,
    pub f: &'s DenseMatrix,
    pub graph: &'s SimilarityGraph,
    pub betas: &'s [f64],
}

/// Runs the solver on a features-by-samples matrix.
pub fn run_agufs(x: &DenseMatrix, cfg: &AgufsConfig) -> Result<AgufsOutput> {
    run_agufs_with(x, cfg, RunOptions::default())
}

pub fn run_agufs_with(x: &DenseMatrix, cfg: &AgufsConfig, opts: RunOptions<'_>) -> Result<AgufsOutput> {
    let (d, n) = x.shape();
    cfg.validate(d, n)?;
    if !x.is_finite() {
        return Err(Error::InvalidInput("data contains non-finite values"));
    }
    let RunOptions {
        initial_indicator,
        clock,
        mut observer,
    } = opts;
    let now = || clock.map_or(0.0, |c| c());
    let start = now();

    let xc = center_columns(x)?;
    let mut warnings = Vec::new();
    if xc.max_abs() == 0.0 {
        log::warn!("all features have zero variance");
        warnings.push(Warning::ZeroVarianceData);
    }
    let w_cfg = cfg.w_config();
    let f_cfg = cfg.f_config();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let drawn_f = random_orthonormal(n, cfg.c, &mut rng)?;
    let mut f = match initial_indicator {
        Some(f0) => {
            if f0.shape() != (n, cfg.c) {
                return Err(Error::ShapeMismatch {
                    expected: (n, cfg.c),
                    found: f0.shape(),
                });
            }
            f0
        }
        None => drawn_f,
    };
    let mut w = random_orthonormal(d, cfg.c, &mut rng)?;
    let (mut graph, mut betas) = learn_s(&xc, &w, &f, cfg.k)?;

    let initial_objective = global_objective(&xc, &w, &f, &graph, &betas, cfg)?.total();
    let mut trace = SolverTrace {
        initial_objective,
        ..Default::default()
    };

    for iteration in 1..=cfg.max_outer_iters {
        let (prev_w, prev_f, prev_graph) = (w.clone(), f.clone(), graph.clone());

        let t0 = now();
        let lap = build_laplacian(&graph);
        let scatter = ScatterTerms::with_graph_scatter(&xc, graph_scatter(&xc, &graph));
        // D_w restarts from the identity on every W-step
        let w_sol = solve_w_with(&xc, &f, &lap, &scatter, &w_cfg, None)?;
        merge_warnings(&mut warnings, &w_sol.warnings);
        w = w_sol.w;

        let t1 = now();
        let (q, c) = build_qc(&xc, &w, &lap, cfg.alpha)?;
        let f_sol = solve_f(&q, &c, &f, &f_cfg)?;
        merge_warnings(&mut warnings, &f_sol.warnings);
        f = f_sol.f;
        let f_residual = orthogonality_residual(&f, None);

        let t2 = now();
        let (new_graph, new_betas) = learn_s(&xc, &w, &f, cfg.k)?;
        graph = new_graph;
        betas = new_betas;
        let t3 = now();

        let terms = global_objective(&xc, &w, &f, &graph, &betas, cfg)?;
        let objective = terms.total();
        if !objective.is_finite() {
            return Err(Error::NumericOverflow("global objective"));
        }
        let previous = global_objective(&xc, &prev_w, &prev_f, &prev_graph, &betas, cfg)?.total();
        let relative_change = (previous - objective) / previous.abs().max(f64::MIN_POSITIVE);

        if let Some(obs) = observer.as_mut() {
            obs(&IterationState {
                iteration,
                w: &w,
                rt_prime: &w_sol.rt_prime,
                f: &f,
                graph: &graph,
                betas: &betas,
            });
        }
        trace.iterations.push(IterationRecord {
            iteration,
            objective,
            previous_objective_same_beta: previous,
            relative_change,
            terms,
            w_residual: w_sol.residual,
            f_residual,
            s_row_sum_deviation: graph.max_row_sum_deviation(),
            w_inner_objectives: w_sol.trace.objectives,
            f_inner_objectives: f_sol.objectives,
            w_step_secs: t1 - t0,
            f_step_secs: t2 - t1,
            s_step_secs: t3 - t2,
            elapsed_secs: t3 - start,
        });
        if relative_change.abs() < cfg.outer_tol {
            trace.converged = true;
            break;
        }
    }

    let x_means: Vec<f64> = (0..d).map(|i| x.row(i).iter().sum::<f64>() / n as f64).collect();
    let f_means: Vec<f64> = f.column_sums().into_iter().map(|s| s / n as f64).collect();
    let bias = compute_bias(&x_means, &w, &f_means)?;

    Ok(AgufsOutput {
        ranking: rank_features(&w, cfg.top_t),
        w,
        f,
        graph,
        betas,
        bias,
        trace,
        warnings,
    })
}

fn learn_s(
    xc: &DenseMatrix,
    w: &DenseMatrix,
    f: &DenseMatrix,
    k: usize,
) -> Result<(SimilarityGraph, Vec<f64>)> {
    let dist = pairwise_projected_distances(xc, w)?;
    let g = combined_affinity_cost(&dist, f)?;
    learn_graph(&g, k)
}

fn merge_warnings(into: &mut Vec<Warning>, from: &[Warning]) {
    for w in from {
        if !into.contains(w) {
            into.push(*w);
        }
    }
}
