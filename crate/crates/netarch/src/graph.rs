//! Per-timestep weighted undirected movement network and the attribute
//! similarity matrix consumed by the embedding solver.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::features::AttributeTable;
use crate::linalg::Matrix;

/// Raw movement record before aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub count: f64,
}

/// Aggregated undirected edge between node indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// One timestep's weighted undirected graph plus its node attribute table.
///
/// Node order is fixed by the attribute table so adjacency, similarity, and
/// embedding rows stay index-aligned through the pipeline.
#[derive(Debug, Clone)]
pub struct AttributedNetwork {
    node_ids: Vec<String>,
    edges: Vec<Edge>,
    attributes: AttributeTable,
    timestep: usize,
}

impl AttributedNetwork {
    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn attributes(&self) -> &AttributeTable {
        &self.attributes
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    /// Total edge weight (self-loops were dropped at construction).
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Replaces the attribute table, keeping edges. The new table must cover
    /// the same nodes in the same order; used by the column-deletion
    /// stability replicas.
    pub fn with_attributes(&self, attributes: AttributeTable) -> Result<AttributedNetwork> {
        if attributes.node_ids() != self.node_ids.as_slice() {
            return Err(Error::MismatchedNodes(
                "replacement attribute table has a different node universe".into(),
            ));
        }
        Ok(AttributedNetwork {
            node_ids: self.node_ids.clone(),
            edges: self.edges.clone(),
            attributes,
            timestep: self.timestep,
        })
    }
}

/// Aggregates raw movement records into an undirected network.
///
/// Parallel records for the same unordered pair are summed, self-loops are
/// dropped, and node order follows `attributes.node_ids`.
pub fn build_network(records: &[EdgeRecord], attributes: AttributeTable) -> Result<AttributedNetwork> {
    let index: HashMap<&str, usize> = attributes
        .node_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
    for rec in records {
        let &si = index
            .get(rec.src.as_str())
            .ok_or_else(|| Error::UnknownNode(rec.src.clone()))?;
        let &di = index
            .get(rec.dst.as_str())
            .ok_or_else(|| Error::UnknownNode(rec.dst.clone()))?;
        if !(rec.count > 0.0) {
            return Err(Error::Input(format!(
                "edge count must be positive: {} -> {} has {}",
                rec.src, rec.dst, rec.count
            )));
        }
        if si == di {
            continue;
        }
        let key = (si.min(di), si.max(di));
        *weights.entry(key).or_insert(0.0) += rec.count;
    }

    let mut edges: Vec<Edge> = weights
        .into_iter()
        .map(|((a, b), weight)| Edge { a, b, weight })
        .collect();
    edges.sort_by_key(|e| (e.a, e.b));

    Ok(AttributedNetwork {
        node_ids: attributes.node_ids().to_vec(),
        edges,
        timestep: attributes.timestep(),
        attributes,
    })
}

/// Symmetric n×n cosine similarity between attribute rows, entries in [-1, 1].
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    values: Matrix,
}

impl SimilarityMatrix {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Cosine similarity of attribute rows. An all-zero row is assigned
/// similarity 0 to every other node and 1 on the diagonal.
pub fn cosine_similarity(attributes: &AttributeTable) -> SimilarityMatrix {
    let n = attributes.n_nodes();
    let vals = attributes.values();
    let norms: Vec<f64> = (0..n).map(|i| crate::linalg::norm2(vals.row(i))).collect();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = 1.0;
        for j in i + 1..n {
            let v = if norms[i] > 0.0 && norms[j] > 0.0 {
                crate::linalg::dot(vals.row(i), vals.row(j)) / (norms[i] * norms[j])
            } else {
                0.0
            };
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SimilarityMatrix { values: s }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn attrs(ids: &[&str], rows: Vec<Vec<f64>>) -> AttributeTable {
        let m = rows[0].len();
        AttributeTable::new(
            ids.iter().map(|s| s.to_string()).collect(),
            (0..m).map(|j| format!("f{j}")).collect(),
            Matrix::from_rows(&rows),
            0,
        )
        .unwrap()
    }

    fn rec(src: &str, dst: &str, count: f64) -> EdgeRecord {
        EdgeRecord {
            src: src.into(),
            dst: dst.into(),
            count,
        }
    }

    #[test]
    fn undirected_aggregation() {
        let a = attrs(&["A", "B"], vec![vec![1.0], vec![2.0]]);
        let net = build_network(&[rec("A", "B", 2.0), rec("B", "A", 3.0)], a).unwrap();
        assert_eq!(net.edges().len(), 1);
        assert_eq!(net.edges()[0], Edge { a: 0, b: 1, weight: 5.0 });
    }

    #[test]
    fn self_loop_dropped() {
        let a = attrs(&["A", "B"], vec![vec![1.0], vec![2.0]]);
        let net = build_network(&[rec("A", "A", 7.0)], a).unwrap();
        assert!(net.edges().is_empty());
    }

    #[test]
    fn unknown_node_rejected() {
        let a = attrs(&["A"], vec![vec![1.0]]);
        let err = build_network(&[rec("A", "Z", 1.0)], a).unwrap_err();
        assert!(matches!(err, Error::UnknownNode(id) if id == "Z"));
    }

    #[test]
    fn random_records_match_hashmap_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ids: Vec<String> = (0..20).map(|i| format!("n{i:02}")).collect();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let table = AttributeTable::new(
            ids.clone(),
            vec!["f0".into()],
            Matrix::from_rows(&rows),
            0,
        )
        .unwrap();

        let mut records = Vec::new();
        for _ in 0..1000 {
            let s = rng.gen_range(0..20);
            let d = rng.gen_range(0..20);
            let c = rng.gen_range(1..10) as f64;
            records.push(rec(&ids[s], &ids[d], c));
        }
        let net = build_network(&records, table).unwrap();

        // Oracle: direct hash-map aggregation over unordered index pairs.
        let mut oracle: HashMap<(usize, usize), f64> = HashMap::new();
        let mut expected_total = 0.0;
        for r in &records {
            let s: usize = r.src[1..].parse().unwrap();
            let d: usize = r.dst[1..].parse().unwrap();
            if s == d {
                continue;
            }
            *oracle.entry((s.min(d), s.max(d))).or_insert(0.0) += r.count;
            expected_total += r.count;
        }
        assert_eq!(net.edges().len(), oracle.len());
        for e in net.edges() {
            assert_eq!(oracle[&(e.a, e.b)], e.weight);
        }
        assert!((net.total_weight() - expected_total).abs() < 1e-9);
    }

    #[test]
    fn cosine_identical_rows() {
        let t = attrs(&["A", "B"], vec![vec![2.0, 1.0], vec![2.0, 1.0]]);
        let s = cosine_similarity(&t);
        assert!((s.values()[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_orthogonal_rows() {
        let t = attrs(&["A", "B"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let s = cosine_similarity(&t);
        assert_eq!(s.values()[(0, 1)], 0.0);
    }

    #[test]
    fn cosine_known_angle() {
        let t = attrs(&["A", "B"], vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
        let s = cosine_similarity(&t);
        assert!((s.values()[(0, 1)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_row_convention() {
        let t = attrs(&["A", "B"], vec![vec![0.0, 0.0], vec![1.0, 2.0]]);
        let s = cosine_similarity(&t);
        assert_eq!(s.values()[(0, 0)], 1.0);
        assert_eq!(s.values()[(0, 1)], 0.0);
        assert_eq!(s.values()[(1, 0)], 0.0);
    }

    #[test]
    fn cosine_symmetric_unit_diag_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let n = rng.gen_range(2usize..100);
            let m = rng.gen_range(1usize..8);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let ids: Vec<&str> = vec![""; n]
                .iter()
                .enumerate()
                .map(|(i, _)| Box::leak(format!("n{i}").into_boxed_str()) as &str)
                .collect();
            let t = attrs(&ids, rows);
            let s = cosine_similarity(&t);
            for i in 0..n {
                assert_eq!(s.values()[(i, i)], 1.0);
                for j in 0..n {
                    assert_eq!(s.values()[(i, j)], s.values()[(j, i)]);
                    assert!(s.values()[(i, j)].abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cosine_invariant_under_row_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let ids: Vec<String> = (0..12).map(|i| format!("n{i}")).collect();
        let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let t = attrs(&id_refs, rows.clone());
        let base = cosine_similarity(&t);

        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let c: f64 = rng.gen_range(0.1..10.0);
                r.iter().map(|v| v * c).collect()
            })
            .collect();
        let t2 = attrs(&id_refs, scaled);
        let got = cosine_similarity(&t2);
        for i in 0..12 {
            for j in 0..12 {
                assert!((base.values()[(i, j)] - got.values()[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
