//! Clustering-based evaluation: Lloyd K-means with k-means++ seeding,
//! best-match accuracy (Kuhn-Munkres) and normalized mutual information.

use alloc::vec;
use alloc::vec::Vec;

// libm-backed float methods; std shadows them when linked in tests
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Default Lloyd iteration cap per restart.
pub const DEFAULT_KMEANS_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    /// Inertia after each Lloyd step.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// K-means on the rows of `points` (`n × t`).
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> Result<ClusteringResult> {
    let (n, t) = points.shape();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must satisfy 1 <= k <= n",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut history = Vec::new();

    for iter in 0..max_iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let p = points.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = sq_dist(p, centroids.row(c));
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }

        let mut sums = DenseMatrix::zeros(k, t);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // move the empty centroid onto the point farthest from its own centroid
                let far = (0..n)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), centroids.row(assignments[a]));
                        let db = sq_dist(points.row(b), centroids.row(assignments[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("k <= n leaves a cluster with two members");
                let old = assignments[far];
                counts[old] -= 1;
                counts[c] = 1;
                assignments[far] = c;
                centroids.row_mut(c).copy_from_slice(points.row(far));
                recompute_centroid(points, &assignments, old, &mut centroids);
                changed = true;
            }
        }

        history.push(inertia(points, &centroids, &assignments));
        if !changed && iter > 0 {
            break;
        }
    }
    let inertia = *history.last().expect("at least one step");
    Ok(ClusteringResult {
        assignments,
        inertia,
        inertia_history: history,
    })
}

fn recompute_centroid(points: &DenseMatrix, assignments: &[usize], c: usize, centroids: &mut DenseMatrix) {
    let t = points.cols();
    let mut sum = vec![0.0; t];
    let mut count = 0usize;
    for (i, &a) in assignments.iter().enumerate() {
        if a == c {
            count += 1;
            for (s, &v) in sum.iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
    }
    if count > 0 {
        for (dst, s) in centroids.row_mut(c).iter_mut().zip(sum) {
            *dst = s / count as f64;
        }
    }
}

fn inertia(points: &DenseMatrix, centroids: &DenseMatrix, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(points.row(i), centroids.row(a)))
        .sum()
}

fn kmeans_plus_plus<R: Rng>(points: &DenseMatrix, k: usize, rng: &mut R) -> DenseMatrix {
    let (n, t) = points.shape();
    let mut centroids = DenseMatrix::zeros(k, t);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

/// Maps arbitrary labels to contiguous ids `0..m` in order of first appearance.
pub fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let ids = labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(p) => p,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect();
    (ids, seen.len())
}

fn contingency(truth: &[usize], pred: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (t, nt) = relabel(truth);
    let (p, np) = relabel(pred);
    let mut table = vec![vec![0usize; nt]; np];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    (table, np, nt)
}

/// Fraction of samples correctly labeled under the best one-to-one mapping
/// from clusters to classes.
pub fn clustering_accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput("label vectors differ in length"));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty label vectors"));
    }
    let (table, np, nt) = contingency(truth, pred);
    let m = np.max(nt);
    let max_count = table.iter().flatten().copied().max().unwrap_or(0) as f64;
    // square cost matrix, padded with zero-gain cells
    let cost: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let gain = if i < np && j < nt { table[i][j] as f64 } else { 0.0 };
                    max_count - gain
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < np && j < nt)
        .map(|(i, &j)| table[i][j])
        .sum();
    Ok(matched as f64 / truth.len() as f64)
}

/// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
/// potentials, O(m³)). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let m = cost.len();
    // 1-based arrays; index 0 is a virtual column
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; m];
    for j in 1..=m {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Mutual information divided by the larger of the two entropies.
///
/// Two single-cluster partitions score 1; if only one is single-cluster the
/// score is 0.
pub fn normalized_mutual_information(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput("label vectors differ in length"));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty label vectors"));
    }
    let n = truth.len() as f64;
    let (table, np, nt) = contingency(truth, pred);
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col: Vec<f64> = (0..nt).map(|j| table.iter().map(|r| r[j]).sum::<usize>() as f64).collect();
    let entropy = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let (hp, ht) = (entropy(&row), entropy(&col));
    let mut mi = 0.0;
    for i in 0..np {
        for j in 0..nt {
            let nij = table[i][j] as f64;
            if nij > 0.0 {
                mi += nij / n * (n * nij / (row[i] * col[j])).ln();
            }
        }
    }
    let denom = hp.max(ht);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub restarts: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `restarts` seeded K-means clusterings (`seed + r`) on the selected
/// features of `x` (`d × n`) and aggregates ACC/NMI against `labels`.
///
/// Standard deviations are population deviations over the restarts.
pub fn evaluate_selection(
    x: &DenseMatrix,
    labels: &[usize],
    selected: &[usize],
    k_clusters: usize,
    restarts: usize,
    seed: u64,
) -> Result<EvalReport> {
    if selected.is_empty() {
        return Err(Error::InvalidInput("no features selected"));
    }
    if selected.iter().any(|&f| f >= x.rows()) {
        return Err(Error::InvalidInput("selected feature index out of range"));
    }
    if labels.len() != x.cols() {
        return Err(Error::InvalidInput("label count does not match sample count"));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter {
            name: "restarts",
            reason: "must be at least 1",
        });
    }
    // samples as rows, selected features as columns
    let points = x.select_rows(selected).transpose();
    let mut accs = Vec::with_capacity(restarts);
    let mut nmis = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let result = kmeans(&points, k_clusters, seed.wrapping_add(r as u64), DEFAULT_KMEANS_ITERS)?;
        accs.push(clustering_accuracy(labels, &result.assignments)?);
        nmis.push(normalized_mutual_information(labels, &result.assignments)?);
    }
    let (acc_mean, acc_std) = mean_std(&accs);
    let (nmi_mean, nmi_std) = mean_std(&nmis);
    Ok(EvalReport {
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest};
    use std::vec::Vec;

    fn permutations(m: usize) -> Vec<Vec<usize>> {
        if m == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(m - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, m - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force_acc(truth: &[usize], pred: &[usize], m: usize) -> f64 {
        permutations(m)
            .iter()
            .map(|perm| truth.iter().zip(pred).filter(|&(&t, &p)| perm[p] == t).count())
            .max()
            .unwrap() as f64
            / truth.len() as f64
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        let t = [3, 1, 4, 1, 5, 9, 2, 6];
        assert_eq!(clustering_accuracy(&t, &t).unwrap(), 1.0);
        assert!(clustering_accuracy(&[0, 1], &[0]).is_err());
        // more clusters than classes
        assert_eq!(clustering_accuracy(&[0, 0, 0, 1], &[0, 1, 2, 3]).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let k = rng.random_range(1..=6);
            let n = rng.random_range(1..30);
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let got = clustering_accuracy(&truth, &pred).unwrap();
            assert_abs_diff_eq!(got, brute_force_acc(&truth, &pred, k), epsilon = 1e-15);
        }
    }

    #[test]
    fn nmi_examples() {
        assert_abs_diff_eq!(normalized_mutual_information(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(normalized_mutual_information(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_abs_diff_eq!(normalized_mutual_information(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(normalized_mutual_information(&[2, 2, 2], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(normalized_mutual_information(&[2, 2, 2], &[0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn nmi_against_direct_entropy() {
        // truth {0,0,0,1}, pred {0,0,1,1}
        let (p, q) = ([0, 0, 0, 1], [0, 0, 1, 1]);
        let h_t = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let h_p = 2f64.ln();
        // joint cells: (0,0)=2, (0,1)=1, (1,1)=1
        let mi = 0.5 * (0.5f64 / (0.75 * 0.5)).ln() + 0.25 * (0.25f64 / (0.75 * 0.5)).ln() + 0.25 * (0.25f64 / (0.25 * 0.5)).ln();
        let expected = mi / h_t.max(h_p);
        assert_abs_diff_eq!(normalized_mutual_information(&p, &q).unwrap(), expected, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn metrics_relabel_invariant(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..40),
            shift in 1usize..50,
        ) {
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let renamed: Vec<usize> = pred.iter().map(|p| (3 - p) * 7 + shift).collect();
            let truth_renamed: Vec<usize> = truth.iter().map(|t| t * 11 + shift).collect();
            let acc = clustering_accuracy(&truth, &pred).unwrap();
            prop_assert!((acc - clustering_accuracy(&truth_renamed, &renamed).unwrap()).abs() < 1e-15);
            let nmi = normalized_mutual_information(&truth, &pred).unwrap();
            prop_assert!((nmi - normalized_mutual_information(&truth_renamed, &renamed).unwrap()).abs() < 1e-12);
            prop_assert!((nmi - normalized_mutual_information(&pred, &truth).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert!((0.0..=1.0).contains(&nmi));
        }
    }

    #[test]
    fn kmeans_separated_pairs() {
        let pts = DenseMatrix::from_rows(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 10.0], &[10.0, 11.0]]).unwrap();
        let r = kmeans(&pts, 2, 3, 100).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert_abs_diff_eq!(r.inertia, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kmeans_identical_points() {
        let pts = DenseMatrix::from_fn(5, 2, |_, j| j as f64);
        let r = kmeans(&pts, 2, 0, 100).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(r.assignments.iter().all(|&a| a < 2));
        assert!(kmeans(&pts, 6, 0, 10).is_err());
    }

    fn brute_force_two_partition(pts: &DenseMatrix) -> f64 {
        let n = pts.rows();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut total = 0.0;
            for side in [true, false] {
                let members: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
                let t = pts.cols();
                let mut mean = vec![0.0; t];
                for &i in &members {
                    for c in 0..t {
                        mean[c] += pts[(i, c)] / members.len() as f64;
                    }
                }
                total += members.iter().map(|&i| sq_dist(pts.row(i), &mean)).sum::<f64>();
            }
            best = best.min(total);
        }
        best
    }

    #[test]
    fn kmeans_against_exhaustive_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = DenseMatrix::gaussian(8, 2, &mut rng);
        let optimum = brute_force_two_partition(&pts);
        let mut hits = 0;
        for seed in 0..30 {
            let r = kmeans(&pts, 2, seed, 300).unwrap();
            assert!(r.inertia >= optimum - 1e-12);
            if (r.inertia - optimum).abs() <= 1e-9 {
                hits += 1;
            }
            for pair in r.inertia_history.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
        assert!(hits >= 25, "only {hits}/30 restarts reached the optimum");
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn single_restart_has_zero_spread() {
        let blobs = crate::synthetic::make_blobs(&crate::synthetic::BlobSpec::default(), 1);
        let all: Vec<usize> = (0..blobs.x.rows()).collect();
        let r = evaluate_selection(&blobs.x, &blobs.labels, &all, 3, 1, 5).unwrap();
        assert_eq!(r.acc_std, 0.0);
        assert_eq!(r.nmi_std, 0.0);
        assert!(evaluate_selection(&blobs.x, &blobs.labels, &[], 3, 1, 5).is_err());
    }

    #[test]
    fn informative_features_cluster_well() {
        let blobs = crate::synthetic::make_blobs(&crate::synthetic::BlobSpec::default(), 2);
        let all: Vec<usize> = (0..blobs.x.rows()).collect();
        let r = evaluate_selection(&blobs.x, &blobs.labels, &all, 3, 30, 0).unwrap();
        assert!(r.acc_mean >= 0.95, "{r:?}");
        let noise: Vec<usize> = all.iter().copied().filter(|f| !blobs.informative.contains(f)).take(10).collect();
        let rn = evaluate_selection(&blobs.x, &blobs.labels, &noise, 3, 30, 0).unwrap();
        let ri = evaluate_selection(&blobs.x, &blobs.labels, &blobs.informative, 3, 30, 0).unwrap();
        assert!(rn.acc_mean <= ri.acc_mean);
    }
}
