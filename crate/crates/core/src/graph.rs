//! Adaptive k-sparse similarity graph.
//!
//! Each row `s_i` minimizes `Σ_j g_ij s_ij + β_i ‖s_i‖²` over the
//! probability simplex with `s_ii = 0`. Choosing `β_i` so that exactly the
//! `k` cheapest neighbors survive gives the closed form
//!
//! ```text
//! s_ij = (g_{i,k+1} - g_ij) / (k g_{i,k+1} - Σ_{h≤k} g_ih)     j ≤ k (sorted)
//! β_i  = (k g_{i,k+1} - Σ_{h≤k} g_ih) / 2
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

/// Row-stochastic similarity matrix stored as per-row neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    k: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SimilarityGraph {
    /// Validates and wraps per-row `(neighbor, weight)` lists.
    pub fn from_rows(k: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() > k {
                return Err(Error::InvalidInput("row has more than k neighbors"));
            }
            let mut sum = 0.0;
            for &(j, s) in row {
                if j >= n || j == i {
                    return Err(Error::InvalidInput("neighbor index out of range or self loop"));
                }
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(Error::InvalidInput("negative or non-finite weight"));
                }
                sum += s;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput("row weights do not sum to one"));
            }
        }
        Ok(SimilarityGraph { n, k, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut s = DenseMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                s[(i, j)] = w;
            }
        }
        s
    }

    /// Largest `|Σ_j s_ij - 1|` over rows.
    pub fn max_row_sum_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| (row.iter().map(|&(_, s)| s).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_ij c_ij s_ij` for a dense cost matrix.
    pub fn weighted_sum(&self, cost: &DenseMatrix) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, s)| cost[(i, j)] * s).sum::<f64>())
            .sum()
    }

    /// `Σ_i β_i ‖s_i‖²`.
    pub fn weighted_square_norm(&self, betas: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(betas)
            .map(|(row, b)| b * row.iter().map(|&(_, s)| s * s).sum::<f64>())
            .sum()
    }
}

/// Symmetrized-degree Laplacian `L = D - (S + Sᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    pub degree: Vec<f64>,
    pub laplacian: DenseMatrix,
}

impl GraphLaplacian {
    /// `Tr(Zᵀ L Z)`.
    pub fn quadratic_form(&self, z: &DenseMatrix) -> f64 {
        z.frobenius_dot(&self.laplacian.matmul(z))
    }
}

/// Squared distances `‖Wᵀx_i - Wᵀx_j‖²` between projected samples
/// (columns of `x`).
pub fn pairwise_projected_distances(x: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if x.rows() != w.rows() {
        return Err(Error::ShapeMismatch {
            expected: (x.rows(), w.cols()),
            found: w.shape(),
        });
    }
    // rows of `proj` are the projected samples
    let proj = x.t_matmul(w);
    Ok(row_distances(&proj))
}

fn row_distances(z: &DenseMatrix) -> DenseMatrix {
    let n = z.rows();
    let mut dist = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = z
                .row(i)
                .iter()
                .zip(z.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    dist
}

/// `g_ij = dist_ij + ½‖fⁱ - fʲ‖²`.
pub fn combined_affinity_cost(dist: &DenseMatrix, f: &DenseMatrix) -> Result<DenseMatrix> {
    let n = dist.rows();
    if dist.cols() != n || f.rows() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            found: (f.rows(), dist.cols()),
        });
    }
    let fd = row_distances(f);
    let mut g = dist.clone();
    g.add_scaled_assign(0.5, &fd);
    Ok(g)
}

/// One row of the closed-form update, with its implied `β_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowUpdate {
    pub neighbors: Vec<(usize, f64)>,
    pub beta: f64,
}

/// Closed-form k-sparse simplex row for sample `i` given its cost row `g_i`.
///
/// Candidates are sorted by `(value, index)`. When `k = n - 1` there is no
/// `(k+1)`-th candidate, so the row uses `k - 1` neighbors instead. A zero
/// denominator (all candidate costs tied) yields uniform weights and `β = 0`.
pub fn update_similarity_row(g: &[f64], i: usize, k: usize) -> Result<RowUpdate> {
    let n = g.len();
    if i >= n {
        return Err(Error::InvalidInput("row index out of range"));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must satisfy 1 <= k <= n - 1",
        });
    }
    let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));

    if order.len() == 1 {
        return Ok(RowUpdate {
            neighbors: vec![(order[0], 1.0)],
            beta: 0.0,
        });
    }
    let k = if k == order.len() { k - 1 } else { k };
    let kf = k as f64;
    let next = g[order[k]];
    let head: f64 = order[..k].iter().map(|&j| g[j]).sum();
    let denom = kf * next - head;

    if !(denom > 1e-14 * kf * next.abs()) {
        return Ok(RowUpdate {
            neighbors: order[..k].iter().map(|&j| (j, 1.0 / kf)).collect(),
            beta: 0.0,
        });
    }
    let mut neighbors: Vec<(usize, f64)> = order[..k]
        .iter()
        .map(|&j| (j, (next - g[j]) / denom))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    // Renormalize away the last ulp of rounding so rows sum to one.
    let total: f64 = neighbors.iter().map(|&(_, s)| s).sum();
    neighbors.iter_mut().for_each(|(_, s)| *s /= total);
    Ok(RowUpdate {
        neighbors,
        beta: 0.5 * denom,
    })
}

/// Learns the full graph from a cost matrix, returning it with per-row `β`.
pub fn learn_graph(g: &DenseMatrix, k: usize) -> Result<(SimilarityGraph, Vec<f64>)> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::InvalidInput("cost matrix must be square"));
    }
    let mut rows = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    for i in 0..n {
        let upd = update_similarity_row(g.row(i), i, k)?;
        rows.push(upd.neighbors);
        betas.push(upd.beta);
    }
    Ok((SimilarityGraph { n, k, rows }, betas))
}

pub fn build_laplacian(s: &SimilarityGraph) -> GraphLaplacian {
    let n = s.n;
    let mut sym = DenseMatrix::zeros(n, n);
    for (i, row) in s.rows.iter().enumerate() {
        for &(j, w) in row {
            sym[(i, j)] += 0.5 * w;
            sym[(j, i)] += 0.5 * w;
        }
    }
    let degree: Vec<f64> = (0..n).map(|i| sym.row(i).iter().sum()).collect();
    let mut laplacian = sym.scale(-1.0);
    for (i, &d) in degree.iter().enumerate() {
        laplacian[(i, i)] += d;
    }
    GraphLaplacian { degree, laplacian }
}

/// `X L Xᵀ` for a features-by-samples `X`, accumulated edge by edge from the
/// sparse graph: `½ Σ_ij s_ij (x_i - x_j)(x_i - x_j)ᵀ`.
pub fn graph_scatter(x: &DenseMatrix, s: &SimilarityGraph) -> DenseMatrix {
    let d = x.rows();
    let xt = x.transpose();
    let mut out = DenseMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (i, row) in s.rows.iter().enumerate() {
        for &(j, w) in row {
            for ((t, a), b) in diff.iter_mut().zip(xt.row(i)).zip(xt.row(j)) {
                *t = a - b;
            }
            let half = 0.5 * w;
            for p in 0..d {
                let scaled = half * diff[p];
                if scaled == 0.0 {
                    continue;
                }
                for (o, &q) in out.row_mut(p).iter_mut().zip(&diff) {
                    *o += scaled * q;
                }
            }
        }
    }
    out
}

/// `Σ_ij s_ij ‖zⁱ - zʲ‖²` over the rows of `z`.
pub fn graph_smoothness(z: &DenseMatrix, s: &SimilarityGraph) -> f64 {
    s.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|&(j, w)| {
                    let zi = z.row(i);
                    let zj = z.row(j);
                    w * (dot(zi, zi) + dot(zj, zj) - 2.0 * dot(zi, zj)).max(0.0)
                })
                .sum::<f64>()
        })
        .sum()
}
