//! Per-timestep partitioning of embeddings with K-means and Gaussian
//! mixtures under fixed seeds.
//!
//! Labels are canonicalized (clusters renumbered by descending size, ties by
//! smallest contained node index) so assignments compare exactly across runs
//! and trajectory merging is well-defined.

mod gmm;
mod kmeans;

pub use gmm::{gmm_fit, GmmCovariance, GmmModel};
pub use kmeans::{kmeans, KMeansModel};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::embed::EmbeddingMatrix;
use crate::error::Result;
use crate::linalg::{sub_norm2, Matrix};

/// Clustering method identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    KMeans,
    Gmm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Gmm => "gmm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Method::KMeans),
            "gmm" => Ok(Method::Gmm),
            other => Err(crate::error::Error::Config(format!(
                "unknown clustering method `{other}` (expected kmeans or gmm)"
            ))),
        }
    }
}

/// Node-to-label map for one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub timestep: usize,
    /// One label in [0, k) per node, in network node order.
    pub labels: Vec<usize>,
    pub k: usize,
    pub method: Method,
    /// K-means inertia or GMM log-likelihood at exit.
    pub score: f64,
}

impl ClusterAssignment {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Member indices per label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Shared fit parameters for both methods.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub seed: u64,
    pub max_iterations: usize,
    pub gmm_tolerance: f64,
    pub gmm_covariance: GmmCovariance,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            seed: 0,
            max_iterations: 100,
            gmm_tolerance: 1e-6,
            gmm_covariance: GmmCovariance::Full,
        }
    }
}

/// Fits `method` on an embedding, returning the canonicalized assignment.
pub fn fit(
    method: Method,
    emb: &EmbeddingMatrix,
    k: usize,
    params: &ClusterParams,
) -> Result<ClusterAssignment> {
    match method {
        Method::KMeans => kmeans(emb, k, params.seed, params.max_iterations).map(|(_, a)| a),
        Method::Gmm => gmm_fit(
            emb,
            k,
            params.seed,
            params.max_iterations,
            params.gmm_tolerance,
            params.gmm_covariance,
        )
        .map(|(_, a)| a),
    }
}

/// Deterministic seed derivation for per-(timestep, k, method) fits.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x << 6).wrapping_add(x >> 2);
        // splitmix64 finalizer
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

/// Greedy farthest-point seeding: the first index is drawn from the run
/// seed, each later one maximizes the distance to the nearest chosen point
/// (ties broken by lowest index).
pub(crate) fn farthest_point_indices(points: &Matrix, k: usize, seed: u64) -> Vec<usize> {
    let n = points.nrows();
    debug_assert!(k >= 1 && k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    taken[first] = true;

    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sub_norm2(points.row(i), points.row(first)))
        .collect();
    while chosen.len() < k {
        let mut best = usize::MAX;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            if best == usize::MAX || nearest[i] > nearest[best] {
                best = i;
            }
        }
        chosen.push(best);
        taken[best] = true;
        for i in 0..n {
            let d = sub_norm2(points.row(i), points.row(best));
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    chosen
}

/// Renumbers labels by descending cluster size, ties by smallest contained
/// node index. Returns the permutation `old label -> new label`.
pub(crate) fn canonicalize_labels(labels: &mut [usize], k: usize) -> Vec<usize> {
    let mut size = vec![0usize; k];
    let mut min_index = vec![usize::MAX; k];
    for (i, &l) in labels.iter().enumerate() {
        size[l] += 1;
        if min_index[l] == usize::MAX {
            min_index[l] = i;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(min_index[a].cmp(&min_index[b])));
    let mut perm = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    for l in labels.iter_mut() {
        *l = perm[*l];
    }
    perm
}
