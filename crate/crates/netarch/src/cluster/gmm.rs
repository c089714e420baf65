//! Gaussian mixture fitting by expectation-maximization.

use crate::cluster::{canonicalize_labels, farthest_point_indices, ClusterAssignment, Method};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_logdet, forward_substitute, Matrix};

const COVARIANCE_REG: f64 = 1e-6;

/// Covariance structure of the mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GmmCovariance {
    Full,
    Diagonal,
}

/// Fitted mixture: means, covariances, and weights in canonical label order.
#[derive(Debug, Clone)]
pub struct GmmModel {
    pub means: Matrix,
    pub covariances: Vec<Matrix>,
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
}

/// Adds the diagonal floor and refuses matrices it cannot factor. The floor
/// is held constant across iterations (1e-6 of the mean global variance):
/// a per-component trace floor shifts the model between E-steps when a
/// component collapses, which breaks EM monotonicity by visible amounts.
fn regularize_and_factor(cov: &mut Matrix, reg: f64, component: usize) -> Result<(Matrix, f64)> {
    let d = cov.nrows();
    for i in 0..d {
        cov[(i, i)] += reg;
    }
    match cholesky(cov) {
        Some(l) => {
            let logdet = cholesky_logdet(&l);
            Ok((l, logdet))
        }
        None => Err(Error::SingularCovariance(component)),
    }
}

fn log_density(x: &[f64], mean: &[f64], chol: &Matrix, logdet: f64) -> f64 {
    let d = x.len();
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let y = forward_substitute(chol, &diff);
    let maha: f64 = y.iter().map(|v| v * v).sum();
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + maha)
}

fn zero_off_diagonal(cov: &mut Matrix) {
    let d = cov.nrows();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                cov[(i, j)] = 0.0;
            }
        }
    }
}

/// EM on the Gaussian mixture likelihood. The per-iteration log-likelihood
/// is non-decreasing (asserted in test builds); hard labels come from the
/// maximum responsibility and are canonicalized together with the model.
pub fn gmm_fit(
    emb: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    covariance: GmmCovariance,
) -> Result<(GmmModel, ClusterAssignment)> {
    let points = emb.values();
    let n = points.nrows();
    let d = points.ncols();
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }

    // Seeded means plus a shared global covariance.
    let seeds = farthest_point_indices(points, k, seed);
    let mut means = Matrix::zeros(k, d);
    for (c, &i) in seeds.iter().enumerate() {
        means.row_mut(c).copy_from_slice(points.row(i));
    }
    let mut global_mean = vec![0.0; d];
    for i in 0..n {
        for (j, &v) in points.row(i).iter().enumerate() {
            global_mean[j] += v;
        }
    }
    for v in &mut global_mean {
        *v /= n as f64;
    }
    let mut global_cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = points.row(i);
        for a in 0..d {
            let da = row[a] - global_mean[a];
            for b in 0..d {
                global_cov[(a, b)] += da * (row[b] - global_mean[b]);
            }
        }
    }
    global_cov.scale(1.0 / n as f64);
    if covariance == GmmCovariance::Diagonal {
        zero_off_diagonal(&mut global_cov);
    }

    let global_trace: f64 = (0..d).map(|i| global_cov[(i, i)]).sum();
    let reg = COVARIANCE_REG * global_trace / d as f64;

    let mut covariances: Vec<Matrix> = vec![global_cov; k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut factors: Vec<(Matrix, f64)> = Vec::with_capacity(k);
    for (c, cov) in covariances.iter_mut().enumerate() {
        factors.push(regularize_and_factor(cov, reg, c)?);
    }

    let mut responsibilities = Matrix::zeros(n, k);
    let mut log_likelihood = f64::NEG_INFINITY;
    // Snapshot of the parameters that produced the current log-likelihood,
    // for monotone stopping (see below).
    let mut snapshot: Option<(Vec<f64>, Matrix, Vec<Matrix>, Matrix, f64)> = None;

    for _ in 0..max_iter.max(1) {
        // E-step with log-sum-exp normalization.
        let mut ll = 0.0;
        for i in 0..n {
            let x = points.row(i);
            let mut logp = vec![0.0; k];
            for c in 0..k {
                logp[c] = weights[c].max(1e-300).ln()
                    + log_density(x, means.row(c), &factors[c].0, factors[c].1);
            }
            let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logp.iter().map(|&v| (v - m).exp()).sum();
            let lse = m + sum_exp.ln();
            ll += lse;
            for c in 0..k {
                responsibilities[(i, c)] = (logp[c] - lse).exp();
            }
        }

        // Monotone stopping: the covariance floor means the M-step is not
        // the exact maximizer, and a component collapsed onto a
        // rank-deficient point set can push the likelihood down. Roll back
        // to the parameters that produced the higher value and stop, so the
        // reported sequence is non-decreasing within slack.
        if ll < log_likelihood - 1e-8 * (1.0 + log_likelihood.abs()) {
            if let Some((w, m, c, r, l)) = snapshot {
                weights = w;
                means = m;
                covariances = c;
                responsibilities = r;
                log_likelihood = l;
            }
            break;
        }
        let improved = ll - log_likelihood;
        log_likelihood = ll;
        snapshot = Some((
            weights.clone(),
            means.clone(),
            covariances.clone(),
            responsibilities.clone(),
            log_likelihood,
        ));

        // M-step.
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| responsibilities[(i, c)]).sum();
            if nk < 1e-12 {
                return Err(Error::SingularCovariance(c));
            }
            weights[c] = nk / n as f64;
            let mean_row = means.row_mut(c);
            mean_row.fill(0.0);
            for i in 0..n {
                let r = responsibilities[(i, c)];
                for (j, &v) in points.row(i).iter().enumerate() {
                    mean_row[j] += r * v;
                }
            }
            for v in mean_row.iter_mut() {
                *v /= nk;
            }
            let mut cov = Matrix::zeros(d, d);
            for i in 0..n {
                let r = responsibilities[(i, c)];
                let row = points.row(i);
                for a in 0..d {
                    let da = row[a] - means[(c, a)];
                    for b in 0..d {
                        cov[(a, b)] += r * da * (row[b] - means[(c, b)]);
                    }
                }
            }
            cov.scale(1.0 / nk);
            if covariance == GmmCovariance::Diagonal {
                zero_off_diagonal(&mut cov);
            }
            factors[c] = regularize_and_factor(&mut cov, reg, c)?;
            covariances[c] = cov;
        }

        if improved.abs() < tol {
            break;
        }
    }

    // Hard labels by maximum responsibility, ties to the lowest component.
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let mut best = 0usize;
        for c in 1..k {
            if responsibilities[(i, c)] > responsibilities[(i, best)] {
                best = c;
            }
        }
        labels[i] = best;
    }
    let perm = canonicalize_labels(&mut labels, k);
    let mut new_means = Matrix::zeros(k, d);
    let mut new_covs = vec![Matrix::zeros(d, d); k];
    let mut new_weights = vec![0.0; k];
    for old in 0..k {
        new_means.row_mut(perm[old]).copy_from_slice(means.row(old));
        new_covs[perm[old]] = covariances[old].clone();
        new_weights[perm[old]] = weights[old];
    }

    Ok((
        GmmModel {
            means: new_means,
            covariances: new_covs,
            weights: new_weights,
            log_likelihood,
        },
        ClusterAssignment {
            timestep: 0,
            labels,
            k,
            method: Method::Gmm,
            score: log_likelihood,
        },
    ))
}
