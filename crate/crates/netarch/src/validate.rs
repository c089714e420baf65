//! Cluster-count selection by average silhouette, method selection by
//! leave-one-column-out stability (APN, AD, ADM, FOM), plus the Dunn
//! validity index and the adjusted Rand index used for synthetic recovery
//! checks.

use rayon::prelude::*;

use crate::cluster::{fit, mix_seed, ClusterParams, Method};
use crate::embed::{embed, EmbeddingMatrix, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::AttributedNetwork;
use crate::linalg::{euclidean, Matrix};

/// Per-point silhouette values and their average.
///
/// S(i) = (b_i − a_i)/max(a_i, b_i) with a_i the mean intra-cluster distance
/// and b_i the smallest mean distance to another cluster; singletons score 0.
pub fn silhouette(points: &Matrix, labels: &[usize]) -> Result<(Vec<f64>, f64)> {
    let n = points.nrows();
    assert_eq!(n, labels.len(), "labels must cover every point");
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }

    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            // Mean distance from i to every cluster in one pass.
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += euclidean(points.row(i), points.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let mut b = f64::INFINITY;
            for c in 0..k {
                if c != own && sizes[c] > 0 {
                    let m = sums[c] / sizes[c] as f64;
                    if m < b {
                        b = m;
                    }
                }
            }
            if a.max(b) == 0.0 {
                0.0
            } else {
                (b - a) / a.max(b)
            }
        })
        .collect();

    let average = values.iter().sum::<f64>() / n as f64;
    Ok((values, average))
}

/// Dunn validity index: smallest inter-cluster point distance over the
/// largest intra-cluster diameter.
pub fn dunn_index(points: &Matrix, labels: &[usize]) -> Result<f64> {
    let n = points.nrows();
    assert_eq!(n, labels.len());
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }

    let mut min_inter = f64::INFINITY;
    let mut max_diam = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(points.row(i), points.row(j));
            if labels[i] == labels[j] {
                if d > max_diam {
                    max_diam = d;
                }
            } else if d < min_inter {
                min_inter = d;
            }
        }
    }
    if max_diam == 0.0 {
        return Err(Error::ZeroDiameter);
    }
    Ok(min_inter / max_diam)
}

/// Average proportion of non-overlap between a full-data clustering and a
/// reduced-data clustering: mean over observations of
/// 1 − |C_red(i) ∩ C_full(i)| / |C_full(i)|. Zero for identical partitions.
pub fn apn(full: &[usize], reduced: &[usize]) -> f64 {
    let n = full.len();
    assert_eq!(n, reduced.len());
    let kf = full.iter().copied().max().map_or(0, |m| m + 1);
    let kr = reduced.iter().copied().max().map_or(0, |m| m + 1);
    let mut contingency = vec![vec![0usize; kr]; kf];
    let mut full_sizes = vec![0usize; kf];
    for i in 0..n {
        contingency[full[i]][reduced[i]] += 1;
        full_sizes[full[i]] += 1;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let overlap = contingency[full[i]][reduced[i]] as f64;
        acc += 1.0 - overlap / full_sizes[full[i]] as f64;
    }
    acc / n as f64
}

/// Average distance: mean over observations of the mean pairwise distance
/// between the full-data cluster of i and the reduced-data cluster of i,
/// with distances measured on `points`.
pub fn average_distance(full: &[usize], reduced: &[usize], points: &Matrix) -> f64 {
    let n = full.len();
    assert_eq!(n, reduced.len());
    assert_eq!(n, points.nrows());
    let kf = full.iter().copied().max().map_or(0, |m| m + 1);
    let kr = reduced.iter().copied().max().map_or(0, |m| m + 1);

    // Mean pairwise distance per (full cluster, reduced cluster) pair.
    let mut sums = vec![vec![0.0f64; kr]; kf];
    let mut full_sizes = vec![0usize; kf];
    let mut red_sizes = vec![0usize; kr];
    for &l in full {
        full_sizes[l] += 1;
    }
    for &l in reduced {
        red_sizes[l] += 1;
    }
    for a in 0..n {
        for b in 0..n {
            sums[full[a]][reduced[b]] += euclidean(points.row(a), points.row(b));
        }
    }
    let mut acc = 0.0;
    for i in 0..n {
        let (fa, rb) = (full[i], reduced[i]);
        acc += sums[fa][rb] / (full_sizes[fa] * red_sizes[rb]) as f64;
    }
    acc / n as f64
}

/// Average distance between means: mean over observations of the distance
/// between the centroid of the reduced-data cluster of i and the centroid of
/// the full-data cluster of i, both computed on `points`.
pub fn average_distance_between_means(full: &[usize], reduced: &[usize], points: &Matrix) -> f64 {
    let n = full.len();
    assert_eq!(n, reduced.len());
    assert_eq!(n, points.nrows());
    let d = points.ncols();
    let centroids = |labels: &[usize]| -> Vec<Vec<f64>> {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (j, &v) in points.row(i).iter().enumerate() {
                sums[l][j] += v;
            }
        }
        for (c, count) in counts.iter().enumerate() {
            if *count > 0 {
                for v in &mut sums[c] {
                    *v /= *count as f64;
                }
            }
        }
        sums
    };
    let full_means = centroids(full);
    let red_means = centroids(reduced);
    let mut acc = 0.0;
    for i in 0..n {
        acc += euclidean(&red_means[reduced[i]], &full_means[full[i]]);
    }
    acc / n as f64
}

/// Figure of merit for one held-out column: root of the mean squared
/// deviation of the column values from their cluster means, with clusters
/// taken from the reduced-data labels.
pub fn figure_of_merit(reduced: &[usize], column: &[f64]) -> f64 {
    let n = reduced.len();
    assert_eq!(n, column.len());
    let k = reduced.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in reduced.iter().enumerate() {
        sums[l] += column[i];
        counts[l] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut acc = 0.0;
    for (i, &l) in reduced.iter().enumerate() {
        let dev = column[i] - means[l];
        acc += dev * dev;
    }
    (acc / n as f64).sqrt()
}

/// Adjusted Rand index between two labelings. 1 for identical partitions,
/// ~0 for independent ones.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().copied().max().map_or(0, |m| m + 1);
    let kb = b.iter().copied().max().map_or(0, |m| m + 1);
    let mut contingency = vec![vec![0u64; kb]; ka];
    for i in 0..n {
        contingency[a[i]][b[i]] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut sum_ij = 0.0;
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for (i, r) in contingency.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            sum_ij += choose2(c);
            row[i] += c;
            col[j] += c;
        }
    }
    let sum_a: f64 = row.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = col.iter().map(|&x| choose2(x)).sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

/// Silhouette sweep results: one row per candidate K, one column per method.
#[derive(Debug, Clone)]
pub struct SilhouetteReport {
    pub k_values: Vec<usize>,
    pub methods: Vec<Method>,
    /// `per_timestep[t][k_idx][m_idx]` = average silhouette of that fit.
    pub per_timestep: Vec<Vec<Vec<f64>>>,
    /// `averaged[k_idx][m_idx]` = mean across timesteps.
    pub averaged: Vec<Vec<f64>>,
}

impl SilhouetteReport {
    /// K with the largest week-averaged silhouette for a method (ties to the
    /// smaller K).
    pub fn best_k(&self, method: Method) -> Option<usize> {
        let m_idx = self.methods.iter().position(|&m| m == method)?;
        let mut best = 0usize;
        for (idx, _) in self.k_values.iter().enumerate() {
            if self.averaged[idx][m_idx] > self.averaged[best][m_idx] {
                best = idx;
            }
        }
        Some(self.k_values[best])
    }

    /// (K, method) pair attaining the overall maximum.
    pub fn best_overall(&self) -> (usize, Method) {
        let mut best = (0usize, 0usize);
        for ki in 0..self.k_values.len() {
            for mi in 0..self.methods.len() {
                if self.averaged[ki][mi] > self.averaged[best.0][best.1] {
                    best = (ki, mi);
                }
            }
        }
        (self.k_values[best.0], self.methods[best.1])
    }

    /// K values ordered by descending week-averaged silhouette for a method.
    pub fn ranked_k(&self, method: Method) -> Vec<usize> {
        let m_idx = self
            .methods
            .iter()
            .position(|&m| m == method)
            .expect("method not in report");
        let mut order: Vec<usize> = (0..self.k_values.len()).collect();
        order.sort_by(|&a, &b| {
            self.averaged[b][m_idx]
                .partial_cmp(&self.averaged[a][m_idx])
                .unwrap()
                .then(self.k_values[a].cmp(&self.k_values[b]))
        });
        order.into_iter().map(|i| self.k_values[i]).collect()
    }
}

/// Fits every K in `k_range` per timestep and method, computes average
/// silhouettes, and averages them across timesteps.
pub fn select_k(
    embeddings: &[EmbeddingMatrix],
    k_range: (usize, usize),
    methods: &[Method],
    params: &ClusterParams,
) -> Result<SilhouetteReport> {
    let (lo, hi) = k_range;
    if embeddings.is_empty() {
        return Err(Error::Input("no embeddings given".into()));
    }
    let n = embeddings[0].n_nodes();
    if lo < 2 || hi < lo || hi > n.saturating_sub(1) {
        return Err(Error::Config(format!(
            "k range [{lo}, {hi}] must lie within [2, {}]",
            n.saturating_sub(1)
        )));
    }
    let k_values: Vec<usize> = (lo..=hi).collect();

    let per_timestep: Vec<Vec<Vec<f64>>> = embeddings
        .par_iter()
        .enumerate()
        .map(|(t, emb)| {
            let mut rows = vec![vec![0.0; methods.len()]; k_values.len()];
            for (ki, &k) in k_values.iter().enumerate() {
                for (mi, &method) in methods.iter().enumerate() {
                    let mut p = params.clone();
                    p.seed = mix_seed(params.seed, &[t as u64, k as u64, mi as u64]);
                    let assign = fit(method, emb, k, &p)?;
                    let (_, avg) = silhouette(emb.values(), &assign.labels)?;
                    rows[ki][mi] = avg;
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut averaged = vec![vec![0.0; methods.len()]; k_values.len()];
    for rows in &per_timestep {
        for (ki, row) in rows.iter().enumerate() {
            for (mi, v) in row.iter().enumerate() {
                averaged[ki][mi] += v;
            }
        }
    }
    for row in &mut averaged {
        for v in row.iter_mut() {
            *v /= per_timestep.len() as f64;
        }
    }

    Ok(SilhouetteReport {
        k_values,
        methods: methods.to_vec(),
        per_timestep,
        averaged,
    })
}

/// Averaged stability measures for one method.
#[derive(Debug, Clone, Copy)]
pub struct StabilityRow {
    pub method: Method,
    pub apn: f64,
    pub ad: f64,
    pub adm: f64,
    pub fom: f64,
}

/// Leave-one-column-out stability comparison across methods. All four
/// measures are averages over the deleted columns; smaller is better.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    /// Methods ordered best-first on each measure.
    pub fn rankings(&self) -> Vec<(&'static str, Vec<Method>)> {
        let measure = |name: &'static str, get: fn(&StabilityRow) -> f64| {
            let mut order: Vec<usize> = (0..self.rows.len()).collect();
            order.sort_by(|&a, &b| get(&self.rows[a]).partial_cmp(&get(&self.rows[b])).unwrap());
            (name, order.into_iter().map(|i| self.rows[i].method).collect())
        };
        vec![
            measure("apn", |r| r.apn),
            measure("ad", |r| r.ad),
            measure("adm", |r| r.adm),
            measure("fom", |r| r.fom),
        ]
    }

    /// Method winning the most measures; ties go to the earlier row.
    pub fn best_method(&self) -> Method {
        let mut wins = vec![0usize; self.rows.len()];
        for (_, ranking) in self.rankings() {
            let winner = ranking[0];
            if let Some(idx) = self.rows.iter().position(|r| r.method == winner) {
                wins[idx] += 1;
            }
        }
        let mut best = 0usize;
        for i in 1..self.rows.len() {
            if wins[i] > wins[best] {
                best = i;
            }
        }
        self.rows[best].method
    }
}

/// For each deleted attribute column, recomputes similarity → embedding →
/// clustering and scores the result against the full-data clustering.
/// APN/AD/ADM distances are measured on the full-data embedding; FOM uses
/// the held-out column values under the reduced-data labels.
pub fn stability(
    network: &AttributedNetwork,
    solver: &SolverConfig,
    params: &ClusterParams,
    k: usize,
    methods: &[Method],
) -> Result<StabilityReport> {
    let m = network.attributes().n_features();
    if m < 2 {
        return Err(Error::InsufficientData(
            "stability needs at least 2 attribute columns".into(),
        ));
    }

    let (full_emb, _) = embed(network, solver)?;

    // One reduced embedding per deleted column, shared across methods.
    let reduced: Vec<(EmbeddingMatrix, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|l| {
            let table = network.attributes().without_column(l);
            let net = network.with_attributes(table)?;
            let (emb, _) = embed(&net, solver)?;
            Ok((emb, network.attributes().column(l)))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let full_assign = fit(method, &full_emb, k, params)?;
        let mut acc = [0.0f64; 4];
        for (emb_l, column) in &reduced {
            let red_assign = fit(method, emb_l, k, params)?;
            acc[0] += apn(&full_assign.labels, &red_assign.labels);
            acc[1] += average_distance(&full_assign.labels, &red_assign.labels, full_emb.values());
            acc[2] += average_distance_between_means(
                &full_assign.labels,
                &red_assign.labels,
                full_emb.values(),
            );
            acc[3] += figure_of_merit(&red_assign.labels, column);
        }
        rows.push(StabilityRow {
            method,
            apn: acc[0] / m as f64,
            ad: acc[1] / m as f64,
            adm: acc[2] / m as f64,
            fom: acc[3] / m as f64,
        });
    }
    Ok(StabilityReport { rows })
}
