//! Lloyd iterations with greedy farthest-point seeding.

use crate::cluster::{canonicalize_labels, farthest_point_indices, ClusterAssignment, Method};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{sub_norm2, Matrix};

/// Fitted centroids, row per cluster in canonical label order.
#[derive(Debug, Clone)]
pub struct KMeansModel {
    pub centroids: Matrix,
}

fn nearest_centroid(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.nrows() {
        let d = sub_norm2(point, centroids.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Alternates nearest-centroid assignment and mean updates until the labels
/// stabilize or `max_iter` is reached. Deterministic given `seed`; an
/// emptied cluster is reseeded with the point farthest from its assigned
/// centroid.
pub fn kmeans(
    emb: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(KMeansModel, ClusterAssignment)> {
    let points = emb.values();
    let n = points.nrows();
    let d = points.ncols();
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }

    let seeds = farthest_point_indices(points, k, seed);
    let mut centroids = Matrix::zeros(k, d);
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(points.row(i));
    }

    let mut labels = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    let mut inertia = f64::INFINITY;

    for _ in 0..max_iter.max(1) {
        // Assignment step.
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let (c, dd) = nearest_centroid(points.row(i), &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dist[i] = dd;
        }
        inertia = dist.iter().map(|d| d * d).sum();
        debug_assert!(
            inertia <= prev_inertia * (1.0 + 1e-12) + 1e-9,
            "inertia increased: {inertia} > {prev_inertia}"
        );
        prev_inertia = inertia;

        // Update step.
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::zeros(k, d);
        for i in 0..n {
            counts[labels[i]] += 1;
            let row = sums.row_mut(labels[i]);
            for (kk, &v) in points.row(i).iter().enumerate() {
                row[kk] += v;
            }
        }
        let mut repaired = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let row = centroids.row_mut(c);
                for kk in 0..d {
                    row[kk] = sums[(c, kk)] / counts[c] as f64;
                }
            } else {
                // Reseed with the point farthest from its assigned centroid
                // that has not already been used for a repair this round.
                let mut far = usize::MAX;
                for i in 0..n {
                    if repaired[i] || counts[labels[i]] <= 1 {
                        continue;
                    }
                    if far == usize::MAX || dist[i] > dist[far] {
                        far = i;
                    }
                }
                if far != usize::MAX {
                    centroids.row_mut(c).copy_from_slice(points.row(far));
                    repaired[far] = true;
                    changed = true;
                }
            }
        }

        if !changed {
            break;
        }
    }

    // Canonical label order; permute the centroids to match.
    let perm = canonicalize_labels(&mut labels, k);
    let mut canonical = Matrix::zeros(k, d);
    for old in 0..k {
        canonical.row_mut(perm[old]).copy_from_slice(centroids.row(old));
    }

    Ok((
        KMeansModel { centroids: canonical },
        ClusterAssignment {
            timestep: 0,
            labels,
            k,
            method: Method::KMeans,
            score: inertia,
        },
    ))
}
