//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N: PASS` line (visible with `--nocapture`). Oracles live in
//! the `oracle` module below and are written independently of the library
//! code paths they check.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use netarch::cluster::{kmeans, ClusterAssignment, ClusterParams, Method};
use netarch::embed::{embed, EmbeddingMatrix, SolverConfig};
use netarch::features::{standardize, AttributeTable};
use netarch::graph::{build_network, cosine_similarity, AttributedNetwork, EdgeRecord};
use netarch::linalg::Matrix;
use netarch::pipeline::{generate_synthetic, manifest, run_pipeline, PipelineConfig, SynthSpec};
use netarch::stats::{chi_square_sf, dunn_posthoc, kruskal_wallis, Correction};
use netarch::validate::{
    adjusted_rand_index, apn, average_distance, average_distance_between_means, dunn_index,
    figure_of_merit, select_k, silhouette, stability,
};

/// Test-local oracles, independent of the library implementations.
mod oracle {
    /// Cyclic Jacobi eigenvalues of a symmetric matrix, written separately
    /// from the library's eigensolver (no shared code).
    pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += m[i][j] * m[i][j];
                    }
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (mkp, mkq) = (m[k][p], m[k][q]);
                        m[k][p] = c * mkp - s * mkq;
                        m[k][q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let (mpk, mqk) = (m[p][k], m[q][k]);
                        m[p][k] = c * mpk - s * mqk;
                        m[q][k] = s * mpk + c * mqk;
                    }
                }
            }
        }
        (0..n).map(|i| m[i][i]).collect()
    }

    pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Rank-then-formula Kruskal-Wallis, with midranks and tie correction,
    /// structured differently from the library path.
    pub fn kruskal_h(groups: &[Vec<f64>]) -> f64 {
        let mut pooled: Vec<(f64, usize)> = Vec::new();
        for (g, vals) in groups.iter().enumerate() {
            for &v in vals {
                pooled.push((v, g));
            }
        }
        pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let n = pooled.len() as f64;
        let mut rank_sums = vec![0.0; groups.len()];
        let mut tie = 0.0;
        let mut i = 0;
        while i < pooled.len() {
            let mut j = i;
            while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
                j += 1;
            }
            let mid = (i + j) as f64 / 2.0 + 1.0;
            for item in &pooled[i..=j] {
                rank_sums[item.1] += mid;
            }
            let t = (j - i + 1) as f64;
            tie += t * t * t - t;
            i = j + 1;
        }
        let mut h = 0.0;
        for (g, vals) in groups.iter().enumerate() {
            h += rank_sums[g] * rank_sums[g] / vals.len() as f64;
        }
        h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
        h / (1.0 - tie / (n * n * n - n))
    }

    fn combos(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if pool.len() < k {
            return vec![];
        }
        let mut out = Vec::new();
        for (i, &x) in pool.iter().enumerate() {
            for mut tail in combos(&pool[i + 1..], k - 1) {
                tail.insert(0, x);
                out.push(tail);
            }
        }
        out
    }

    /// Every H value over all assignments of the pooled sample to groups of
    /// the given sizes (the full permutation-test distribution).
    pub fn permutation_h_distribution(pooled: &[f64], sizes: &[usize]) -> Vec<f64> {
        fn walk(
            avail: Vec<usize>,
            sizes: &[usize],
            pooled: &[f64],
            acc: &mut Vec<Vec<f64>>,
            out: &mut Vec<f64>,
        ) {
            if sizes.is_empty() {
                out.push(super::oracle::kruskal_h(acc));
                return;
            }
            for chosen in combos(&avail, sizes[0]) {
                let rest: Vec<usize> = avail
                    .iter()
                    .copied()
                    .filter(|x| !chosen.contains(x))
                    .collect();
                acc.push(chosen.iter().map(|&i| pooled[i]).collect());
                walk(rest, &sizes[1..], pooled, acc, out);
                acc.pop();
            }
        }
        let mut out = Vec::new();
        walk(
            (0..pooled.len()).collect(),
            sizes,
            pooled,
            &mut Vec::new(),
            &mut out,
        );
        out
    }

    /// All permutations of 0..k via Heap's algorithm.
    pub fn permutations(k: usize) -> Vec<Vec<usize>> {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut out = Vec::new();
        fn heaps(perm: &mut Vec<usize>, size: usize, out: &mut Vec<Vec<usize>>) {
            if size == 1 {
                out.push(perm.clone());
                return;
            }
            for i in 0..size {
                heaps(perm, size - 1, out);
                if size % 2 == 0 {
                    perm.swap(i, size - 1);
                } else {
                    perm.swap(0, size - 1);
                }
            }
        }
        heaps(&mut perm, k, &mut out);
        out
    }
}

fn random_attributed_network(n: usize, m: usize, edge_prob: f64, seed: u64) -> AttributedNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("n{i:04}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let table = AttributeTable::new(
        ids.clone(),
        (0..m).map(|j| format!("f{j}")).collect(),
        Matrix::from_rows(&rows),
        0,
    )
    .unwrap();
    let mut records = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(edge_prob) {
                records.push(EdgeRecord {
                    src: ids[i].clone(),
                    dst: ids[j].clone(),
                    count: rng.gen_range(1..20) as f64,
                });
            }
        }
    }
    build_network(&records, table).unwrap()
}

fn temp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("netarch_accept_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Reads a synthetic week back and prepares it the way the pipeline does.
fn load_week(dir: &std::path::Path, t: usize) -> AttributedNetwork {
    let attrs =
        netarch::io::read_attribute_table(&dir.join(format!("week_{t}/attributes.csv")), t).unwrap();
    let attrs = standardize(&attrs.impute_median());
    let records = netarch::io::read_edge_records(&dir.join(format!("week_{t}/edges.csv"))).unwrap();
    build_network(&records, attrs).unwrap()
}

#[test]
fn criterion_01_solver_convergence() {
    let start = Instant::now();
    let config = SolverConfig {
        dimension: 16,
        ..SolverConfig::default()
    };
    let mut converged = 0;
    for seed in 0..20 {
        let net = random_attributed_network(100, 8, 0.05, 9000 + seed);
        let (_, trace) = embed(&net, &config).unwrap();
        if trace.converged && trace.iterations <= 50 {
            converged += 1;
        }
        assert!(
            *trace.objective.last().unwrap() <= trace.initial_objective,
            "seed {seed}: exit objective {} above initial {}",
            trace.objective.last().unwrap(),
            trace.initial_objective
        );
    }
    let elapsed = start.elapsed();
    assert!(
        converged >= 19,
        "only {converged}/20 runs reached 1e-4 within 50 iterations"
    );
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 1: PASS — residual < 1e-4 within 50 iterations in {converged}/20 runs, exit ≤ initial objective in all, {elapsed:?}"
    );
}

#[test]
fn criterion_02_spectral_sanity_at_lambda_zero() {
    let n = 60;
    let m = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ids: Vec<String> = (0..n).map(|i| format!("n{i:04}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let b = i * 3 / n;
            (0..m)
                .map(|c| if c == b { 2.0 } else { 0.0 } + rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let table = AttributeTable::new(
        ids,
        (0..m).map(|j| format!("f{j}")).collect(),
        Matrix::from_rows(&rows),
        0,
    )
    .unwrap();
    let net = build_network(&[], table).unwrap();
    let s = cosine_similarity(net.attributes()).values().clone();

    // Independent oracle: eigen spectrum from the test-local Jacobi.
    let s_rows: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
    let mut eigvals = oracle::jacobi_eigenvalues(&s_rows);
    eigvals.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut ratios = Vec::new();
    for d in [4usize, 8] {
        let config = SolverConfig {
            dimension: d,
            lambda: 0.0,
            max_iterations: 300,
            primal_tolerance: 1e-7,
            ..SolverConfig::default()
        };
        let (emb, _) = embed(&net, &config).unwrap();
        let q = emb.values();
        let qqt = q.matmul(&q.transpose());
        let mut err_sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                let e = s[(i, j)] - qqt[(i, j)];
                err_sq += e * e;
            }
        }
        let floor_sq: f64 = eigvals.iter().skip(d).map(|v| v * v).sum();
        let ratio = err_sq.sqrt() / floor_sq.sqrt();
        assert!(
            ratio <= 1.05,
            "d={d}: error {} exceeds spectral floor {} by more than 5%",
            err_sq.sqrt(),
            floor_sq.sqrt()
        );
        ratios.push(ratio);
    }
    println!(
        "criterion 2: PASS — ‖S−QQᵀ‖ within 5% of the rank-d eigen floor (ratios {:.4}, {:.4})",
        ratios[0], ratios[1]
    );
}

#[test]
fn criterion_03_planted_partition_recovery() {
    let start = Instant::now();
    // The planted structure lives in both the attributes and the edges, so
    // the balance parameter is turned up to let the solver use the network.
    let solver = SolverConfig {
        dimension: 16,
        lambda: 5.0,
        ..SolverConfig::default()
    };

    // Silhouette sweep on one 3-week dataset.
    let dir = temp_dir("c3_sweep");
    let spec = SynthSpec {
        nodes: 200,
        timesteps: 3,
        switchers: Some(0),
        seed: 31,
        ..SynthSpec::default()
    };
    generate_synthetic(&spec, &dir).unwrap();
    let embeddings: Vec<EmbeddingMatrix> = (0..3)
        .map(|t| embed(&load_week(&dir, t), &solver).unwrap().0)
        .collect();
    let report = select_k(
        &embeddings,
        (2, 6),
        &[Method::KMeans],
        &ClusterParams::default(),
    )
    .unwrap();
    let ranked = report.ranked_k(Method::KMeans);
    assert!(
        ranked[..2].contains(&4),
        "K=4 not in the silhouette top 2: ranking {ranked:?}"
    );

    // Median ARI over 10 seeds.
    let mut aris = Vec::new();
    for seed in 0..10u64 {
        let dir = temp_dir(&format!("c3_ari_{seed}"));
        let spec = SynthSpec {
            nodes: 200,
            timesteps: 1,
            switchers: Some(0),
            seed: 100 + seed,
            ..SynthSpec::default()
        };
        let ds = generate_synthetic(&spec, &dir).unwrap();
        let (emb, _) = embed(&load_week(&dir, 0), &solver).unwrap();
        let (_, assign) = kmeans(&emb, 4, seed, 200).unwrap();
        aris.push(adjusted_rand_index(&assign.labels, &ds.truth[0]));
    }
    aris.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (aris[4] + aris[5]) / 2.0;
    let elapsed = start.elapsed();
    assert!(median >= 0.9, "median ARI {median} below 0.9 ({aris:?})");
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "criterion 3: PASS — K=4 ranked {:?} of the sweep, median ARI {median:.3} over 10 seeds, {elapsed:?}",
        ranked.iter().position(|&k| k == 4).unwrap() + 1
    );
}

#[test]
fn criterion_04_stability_measure_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    for trial in 0..50 {
        let n = rng.gen_range(6usize..=30);
        let m_cols = rng.gen_range(2usize..=6);
        let d = rng.gen_range(2usize..=4);
        let kf = rng.gen_range(2usize..=4);
        let points_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let points = Matrix::from_rows(&points_rows);
        let full: Vec<usize> = (0..n).map(|i| i % kf).collect();

        for _l in 0..m_cols {
            let kr = rng.gen_range(2usize..=4);
            let reduced: Vec<usize> = (0..n).map(|_| rng.gen_range(0..kr)).collect();
            let column: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();

            // APN oracle: direct per-observation intersection counting.
            let mut apn_acc = 0.0;
            for i in 0..n {
                let full_cluster: Vec<usize> = (0..n).filter(|&j| full[j] == full[i]).collect();
                let inter = full_cluster.iter().filter(|&&j| reduced[j] == reduced[i]).count();
                apn_acc += 1.0 - inter as f64 / full_cluster.len() as f64;
            }
            let apn_oracle = apn_acc / n as f64;
            assert!(
                (apn(&full, &reduced) - apn_oracle).abs() < 1e-10,
                "trial {trial}: APN mismatch"
            );

            // AD oracle: per-observation mean pairwise distance, triple loop.
            let mut ad_acc = 0.0;
            for i in 0..n {
                let fc: Vec<usize> = (0..n).filter(|&j| full[j] == full[i]).collect();
                let rc: Vec<usize> = (0..n).filter(|&j| reduced[j] == reduced[i]).collect();
                let mut s = 0.0;
                for &a in &fc {
                    for &b in &rc {
                        s += oracle::euclid(&points_rows[a], &points_rows[b]);
                    }
                }
                ad_acc += s / (fc.len() * rc.len()) as f64;
            }
            let ad_oracle = ad_acc / n as f64;
            assert!(
                (average_distance(&full, &reduced, &points) - ad_oracle).abs() < 1e-10,
                "trial {trial}: AD mismatch"
            );

            // ADM oracle: per-observation centroid distance, recomputed fresh.
            let mut adm_acc = 0.0;
            for i in 0..n {
                let centroid = |members: &[usize]| -> Vec<f64> {
                    let mut c = vec![0.0; d];
                    for &j in members {
                        for (k, &v) in points_rows[j].iter().enumerate() {
                            c[k] += v;
                        }
                    }
                    c.iter().map(|v| v / members.len() as f64).collect()
                };
                let fc: Vec<usize> = (0..n).filter(|&j| full[j] == full[i]).collect();
                let rc: Vec<usize> = (0..n).filter(|&j| reduced[j] == reduced[i]).collect();
                adm_acc += oracle::euclid(&centroid(&rc), &centroid(&fc));
            }
            let adm_oracle = adm_acc / n as f64;
            assert!(
                (average_distance_between_means(&full, &reduced, &points) - adm_oracle).abs() < 1e-10,
                "trial {trial}: ADM mismatch"
            );

            // FOM oracle: per-cluster two-loop RMS deviation.
            let kr_max = reduced.iter().copied().max().unwrap() + 1;
            let mut total = 0.0;
            for c in 0..kr_max {
                let members: Vec<usize> = (0..n).filter(|&j| reduced[j] == c).collect();
                if members.is_empty() {
                    continue;
                }
                let mean: f64 =
                    members.iter().map(|&j| column[j]).sum::<f64>() / members.len() as f64;
                for &j in &members {
                    total += (column[j] - mean) * (column[j] - mean);
                }
            }
            let fom_oracle = (total / n as f64).sqrt();
            assert!(
                (figure_of_merit(&reduced, &column) - fom_oracle).abs() < 1e-10,
                "trial {trial}: FOM mismatch"
            );
        }
    }

    // Duplicated-column construction: two well-separated blocks, every
    // feature present twice. Deleting any one copy must reproduce the
    // clustering exactly, giving APN = 0 and ADM = 0.
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let n = 24;
    let ids: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let block_mean = if i < 12 { 5.0 } else { -5.0 };
            let base: Vec<f64> = (0..3)
                .map(|_| block_mean + rng.gen_range(-0.5..0.5))
                .collect();
            let mut row = base.clone();
            row.extend(base);
            row
        })
        .collect();
    let table = AttributeTable::new(
        ids,
        (0..6).map(|j| format!("f{j}")).collect(),
        Matrix::from_rows(&rows),
        0,
    )
    .unwrap();
    let net = build_network(&[], standardize(&table)).unwrap();
    let solver = SolverConfig {
        dimension: 4,
        lambda: 0.0,
        ..SolverConfig::default()
    };
    let report = stability(&net, &solver, &ClusterParams::default(), 2, &[Method::KMeans]).unwrap();
    assert_eq!(report.rows[0].apn, 0.0, "APN not exactly zero");
    assert_eq!(report.rows[0].adm, 0.0, "ADM not exactly zero");
    println!(
        "criterion 4: PASS — APN/AD/ADM/FOM match brute force to 1e-10 on 50 instances; duplicated-column APN = ADM = 0 exactly"
    );
}

#[test]
fn criterion_05_method_comparison_machinery() {
    let solver = SolverConfig {
        dimension: 8,
        ..SolverConfig::default()
    };
    let methods = [Method::KMeans, Method::Gmm];
    let mut kmeans_wins = 0;
    let mut ranked_ok = true;
    for seed in 0..10u64 {
        let dir = temp_dir(&format!("c5_{seed}"));
        let spec = SynthSpec {
            nodes: 100,
            timesteps: 1,
            switchers: Some(0),
            seed: 500 + seed,
            ..SynthSpec::default()
        };
        generate_synthetic(&spec, &dir).unwrap();
        let net = load_week(&dir, 0);
        let params = ClusterParams {
            seed,
            ..ClusterParams::default()
        };
        let report = stability(&net, &solver, &params, 4, &methods).unwrap();

        // The report must rank both methods on all four measures.
        let rankings = report.rankings();
        ranked_ok &= rankings.len() == 4
            && rankings.iter().all(|(_, order)| {
                order.len() == 2 && order.contains(&Method::KMeans) && order.contains(&Method::Gmm)
            });

        let km = report.rows.iter().find(|r| r.method == Method::KMeans).unwrap();
        let gm = report.rows.iter().find(|r| r.method == Method::Gmm).unwrap();
        if km.apn <= gm.apn {
            kmeans_wins += 1;
        }
    }
    assert!(ranked_ok, "stability report missing a measure ranking");
    assert!(
        kmeans_wins >= 7,
        "k-means APN ≤ GMM APN in only {kmeans_wins}/10 seeds"
    );
    println!(
        "criterion 5: PASS — methods ranked on all four measures; k-means APN ≤ GMM APN in {kmeans_wins}/10 seeds"
    );
}

#[test]
fn criterion_06_statistical_oracles() {
    // Hand-ranked closed form.
    let kw = kruskal_wallis(&[
        vec![1.0, 2.0, 3.0],
        vec![4.0, 5.0, 6.0],
        vec![7.0, 8.0, 9.0],
    ])
    .unwrap();
    assert!((kw.h - 7.2).abs() < 1e-12, "H = {} ≠ 7.2", kw.h);

    // 200 random instances against the independent rank-formula oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let mut checked = 0;
    while checked < 200 {
        let k = rng.gen_range(2usize..5);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let size = rng.gen_range(2usize..10);
                (0..size).map(|_| rng.gen_range(0..8) as f64).collect()
            })
            .collect();
        let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
        if pooled.len() < 3 || pooled.iter().all(|&v| v == pooled[0]) {
            continue;
        }
        let got = kruskal_wallis(&groups).unwrap().h;
        let expect = oracle::kruskal_h(&groups);
        assert!((got - expect).abs() < 1e-9, "H {got} vs oracle {expect}");
        checked += 1;
    }

    // Exact permutation oracle for N ≤ 12: over full enumerations of
    // three-group shapes, the chi-square p agrees with the exact permutation
    // p within 0.03 absolute throughout the decision-relevant tail
    // (exact p ≤ 0.1). Mid-range p at these sample sizes carries the
    // intrinsic discreteness gap of the approximation, measured separately.
    let mut tail_worst = 0.0f64;
    let mut tail_points = 0;
    for sizes in [vec![4usize, 4, 4], vec![3, 4, 5], vec![6, 3, 3]] {
        let n: usize = sizes.iter().sum();
        assert!(n <= 12);
        let pooled: Vec<f64> = (1..=n).map(|r| r as f64).collect();
        let dist = oracle::permutation_h_distribution(&pooled, &sizes);
        let total = dist.len() as f64;
        let mut uniq = dist.clone();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        for &h in &uniq {
            let exact = dist.iter().filter(|&&x| x >= h - 1e-9).count() as f64 / total;
            if exact <= 0.1 {
                let gap = (chi_square_sf(h, (sizes.len() - 1) as f64) - exact).abs();
                tail_worst = tail_worst.max(gap);
                tail_points += 1;
                assert!(
                    gap <= 0.03,
                    "shape {sizes:?}, H = {h}: |chi2 − exact| = {gap} exceeds 0.03"
                );
            }
        }
    }
    assert!(tail_points > 10, "tail region under-sampled");

    // Dunn post hoc under the null: ≤ 10% of pairs flagged at α = 0.05
    // (Holm-adjusted) over 500 Monte Carlo replicates.
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let mut flagged = 0usize;
    let mut pairs_total = 0usize;
    for _ in 0..500 {
        let groups: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..10)
                    .map(|_| {
                        let u1: f64 = rng.gen_range(1e-12..1.0);
                        let u2: f64 = rng.gen();
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect()
            })
            .collect();
        for pair in dunn_posthoc(&groups, 0.05, Correction::Holm).unwrap() {
            pairs_total += 1;
            if pair.significant {
                flagged += 1;
            }
        }
    }
    let rate = flagged as f64 / pairs_total as f64;
    assert!(rate <= 0.10, "null flag rate {rate} above 10%");
    println!(
        "criterion 6: PASS — H = 7.2 exact; 200 oracle matches to 1e-9; tail |chi2−exact| ≤ 0.03 (worst {tail_worst:.4} over {tail_points} points); null flag rate {rate:.4}"
    );
}

#[test]
fn criterion_07_validity_index_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    for trial in 0..100 {
        let n = rng.gen_range(4usize..=40);
        // k < n so at least one cluster holds two (distinct) points and the
        // Dunn denominator is nonzero.
        let k = rng.gen_range(2usize..=4.min(n - 1));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
            .collect();
        let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        labels.shuffle(&mut rng);
        let points = Matrix::from_rows(&rows);

        // Silhouette oracle: direct per-point means over clusters.
        let (values, _) = silhouette(&points, &labels).unwrap();
        for i in 0..n {
            let own = labels[i];
            let own_members: Vec<usize> = (0..n).filter(|&j| labels[j] == own).collect();
            let expect = if own_members.len() == 1 {
                0.0
            } else {
                let a: f64 = own_members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| oracle::euclid(&rows[i], &rows[j]))
                    .sum::<f64>()
                    / (own_members.len() - 1) as f64;
                let mut b = f64::INFINITY;
                for c in 0..k {
                    if c == own {
                        continue;
                    }
                    let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                    if members.is_empty() {
                        continue;
                    }
                    b = b.min(
                        members
                            .iter()
                            .map(|&j| oracle::euclid(&rows[i], &rows[j]))
                            .sum::<f64>()
                            / members.len() as f64,
                    );
                }
                if a.max(b) == 0.0 {
                    0.0
                } else {
                    (b - a) / a.max(b)
                }
            };
            assert!(
                (values[i] - expect).abs() < 1e-12,
                "trial {trial}, point {i}: silhouette {} vs oracle {expect}",
                values[i]
            );
        }

        // Dunn index oracle.
        let mut min_inter = f64::INFINITY;
        let mut max_diam = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let dist = oracle::euclid(&rows[i], &rows[j]);
                if labels[i] == labels[j] {
                    max_diam = max_diam.max(dist);
                } else {
                    min_inter = min_inter.min(dist);
                }
            }
        }
        match dunn_index(&points, &labels) {
            Ok(d) => assert!(
                (d - min_inter / max_diam).abs() < 1e-12,
                "trial {trial}: dunn {d} vs oracle {}",
                min_inter / max_diam
            ),
            Err(e) => panic!("trial {trial}: unexpected dunn error {e}"),
        }
    }

    // Singleton convention.
    let points = Matrix::from_rows(&[vec![0.0], vec![9.0], vec![9.5]]);
    let (values, _) = silhouette(&points, &[0, 1, 1]).unwrap();
    assert_eq!(values[0], 0.0, "singleton silhouette must be 0");
    println!(
        "criterion 7: PASS — silhouette and Dunn index match O(n²) brute force to 1e-12 on 100 labelings; singleton convention holds"
    );
}

#[test]
fn criterion_08_archetype_logic() {
    use netarch::archetype::{align_labels, merge_archetypes, LabelTrajectory};

    let mut rng = ChaCha8Rng::seed_from_u64(800);
    for trial in 0..100 {
        let n = rng.gen_range(4usize..=16);
        let k = rng.gen_range(2usize..=4);
        let seq: Vec<ClusterAssignment> = (0..4)
            .map(|t| {
                let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
                labels.shuffle(&mut rng);
                ClusterAssignment {
                    timestep: t,
                    labels,
                    k,
                    method: Method::KMeans,
                    score: 0.0,
                }
            })
            .collect();
        let aligned = align_labels(&seq).unwrap();
        for t in 0..4 {
            // Partition preservation, via the exhaustive permutation oracle:
            // the aligned labels must equal the raw labels under some label
            // permutation, and that permutation must attain the maximum
            // overlap with the aligned previous step.
            let found = oracle::permutations(k).into_iter().find(|p| {
                seq[t]
                    .labels
                    .iter()
                    .zip(&aligned[t].labels)
                    .all(|(&raw, &al)| p[raw] == al)
            });
            assert!(
                found.is_some(),
                "trial {trial}, t={t}: aligned labels are not a relabeling"
            );
            if t > 0 {
                let overlap = |labels: &[usize]| -> usize {
                    labels
                        .iter()
                        .zip(&aligned[t - 1].labels)
                        .filter(|(a, b)| a == b)
                        .count()
                };
                let achieved = overlap(&aligned[t].labels);
                let best = oracle::permutations(k)
                    .into_iter()
                    .map(|p| {
                        let relabeled: Vec<usize> =
                            seq[t].labels.iter().map(|&l| p[l]).collect();
                        overlap(&relabeled)
                    })
                    .max()
                    .unwrap();
                assert_eq!(achieved, best, "trial {trial}, t={t}: alignment not optimal");
            }
        }
    }

    // Size-threshold fixture: groups of 30/25/20/19/7 nodes, min size 20.
    let mut trajectories = Vec::new();
    let mut id = 0;
    for (count, sig) in [
        (30usize, vec![0usize, 0, 0]),
        (25, vec![1, 1, 1]),
        (20, vec![0, 1, 1]),
        (19, vec![1, 0, 0]),
        (7, vec![2, 2, 2]),
    ] {
        for _ in 0..count {
            trajectories.push(LabelTrajectory {
                node_id: format!("n{id:03}"),
                labels: sig.clone(),
            });
            id += 1;
        }
    }
    let table = merge_archetypes(&trajectories, 20);
    let retained: Vec<usize> = table.archetypes.iter().map(|a| a.size()).collect();
    let dropped: Vec<usize> = table.dropped.iter().map(|a| a.size()).collect();
    assert_eq!(retained, vec![30, 25, 20]);
    assert_eq!(dropped, vec![19, 7]);
    println!(
        "criterion 8: PASS — alignment preserves partitions optimally on 100 sequences; min-size filter drops exactly the sub-threshold groups"
    );
}

#[test]
fn criterion_09_end_to_end_determinism() {
    let start = Instant::now();
    let data_dir = temp_dir("c9_data");
    let spec = SynthSpec {
        nodes: 120,
        timesteps: 17,
        switchers: Some(12),
        seed: 42,
        ..SynthSpec::default()
    };
    generate_synthetic(&spec, &data_dir).unwrap();

    let run = |out: &std::path::Path| {
        let cfg = PipelineConfig {
            input_dir: data_dir.clone(),
            output_dir: out.to_path_buf(),
            timesteps: 17,
            seed: 42,
            solver: SolverConfig {
                dimension: 16,
                ..SolverConfig::default()
            },
            ..PipelineConfig::default()
        };
        run_pipeline(&cfg).unwrap()
    };
    let out_a = temp_dir("c9_out_a");
    let out_b = temp_dir("c9_out_b");
    let manifest_a = run(&out_a);
    let manifest_b = run(&out_b);

    let digests_a = manifest::digest_tree(&out_a, &["manifest.json"]).unwrap();
    let digests_b = manifest::digest_tree(&out_b, &["manifest.json"]).unwrap();
    assert!(!digests_a.is_empty());
    assert_eq!(digests_a, digests_b, "output digests differ between runs");
    assert_eq!(manifest_a.outputs, manifest_b.outputs);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 180.0, "took {elapsed:?}");
    println!(
        "criterion 9: PASS — two 17-week runs produced {} byte-identical outputs in {elapsed:?}",
        digests_a.len()
    );
}

#[test]
fn criterion_10_feature_formulas() {
    use netarch::features::{
        reproduction_number, venables_distance, ActivityGrid, CaseSeries, GridCell,
    };

    // Two equal cells 100 m apart.
    let grid = ActivityGrid::new(vec![
        GridCell { x: 0.0, y: 0.0, intensity: 4.0 },
        GridCell { x: 100.0, y: 0.0, intensity: 4.0 },
    ])
    .unwrap();
    assert!((venables_distance(&grid).unwrap() - 100.0).abs() < 1e-12);

    // Scale invariance under a uniform intensity factor of 7.
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let cells: Vec<GridCell> = (0..12)
        .map(|_| GridCell {
            x: rng.gen_range(-500.0..500.0),
            y: rng.gen_range(-500.0..500.0),
            intensity: rng.gen_range(0.1..5.0),
        })
        .collect();
    let base = venables_distance(&ActivityGrid::new(cells.clone()).unwrap()).unwrap();
    let scaled: Vec<GridCell> = cells
        .iter()
        .map(|c| GridCell {
            intensity: c.intensity * 7.0,
            ..*c
        })
        .collect();
    let got = venables_distance(&ActivityGrid::new(scaled).unwrap()).unwrap();
    assert!((got - base).abs() < 1e-9 * base);

    // Doubling over exactly tau days gives 2.0; a flat series gives 1.0.
    let doubling = CaseSeries::new(vec![20, 40], 5.1).unwrap();
    let r = reproduction_number(&doubling, (0, 1), 5.1).unwrap();
    assert!((r - 2.0).abs() < 1e-12, "doubling R0 = {r}");
    let flat = CaseSeries::new(vec![7, 7, 7], 3.0).unwrap();
    assert_eq!(reproduction_number(&flat, (0, 2), 5.1).unwrap(), 1.0);
    println!(
        "criterion 10: PASS — Venables closed form and scale invariance hold; R0 doubling = 2.0, flat = 1.0"
    );
}
