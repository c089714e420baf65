//! Temporal label alignment and trajectory merging.
//!
//! Weekly clusterings are fitted independently, so label identities carry no
//! meaning across timesteps. `align_labels` chains an optimal bipartite
//! assignment on the week-to-week contingency table, after which nodes with
//! identical label trajectories can be merged into archetypes.

use std::collections::BTreeMap;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};

/// One node's aligned cluster labels over all timesteps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTrajectory {
    pub node_id: String,
    pub labels: Vec<usize>,
}

/// A group of nodes sharing one trajectory signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Archetype {
    pub id: usize,
    pub signature: Vec<usize>,
    pub members: Vec<String>,
}

impl Archetype {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Signature rendered as "0-1-1-…".
    pub fn signature_string(&self) -> String {
        self.signature
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Retained archetypes plus the groups filtered out by the size threshold.
#[derive(Debug, Clone)]
pub struct ArchetypeTable {
    pub archetypes: Vec<Archetype>,
    pub min_size: usize,
    pub dropped: Vec<Archetype>,
}

/// Minimum-cost perfect assignment on a square cost matrix (O(k³) shortest
/// augmenting paths with potentials). Returns `assignment[row] = column`.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Permutes each timestep's labels to maximize contingency overlap with the
/// previous (already aligned) timestep; timestep 0 keeps its canonical order.
/// Only label names change — co-membership within every timestep is preserved.
pub fn align_labels(assignments: &[ClusterAssignment]) -> Result<Vec<ClusterAssignment>> {
    if assignments.is_empty() {
        return Ok(Vec::new());
    }
    let n = assignments[0].n_nodes();
    let k = assignments[0].k;
    for (t, a) in assignments.iter().enumerate() {
        if a.n_nodes() != n {
            return Err(Error::MismatchedNodes(format!(
                "timestep {t} has {} nodes, expected {n}",
                a.n_nodes()
            )));
        }
        if a.k != k {
            return Err(Error::Input(format!(
                "timestep {t} has K = {}, expected {k}",
                a.k
            )));
        }
    }

    let mut out: Vec<ClusterAssignment> = Vec::with_capacity(assignments.len());
    out.push(assignments[0].clone());
    for t in 1..assignments.len() {
        let prev = &out[t - 1];
        let cur = &assignments[t];
        let mut contingency = vec![vec![0usize; k]; k];
        for i in 0..n {
            contingency[prev.labels[i]][cur.labels[i]] += 1;
        }
        // Maximize overlap = minimize negated counts.
        let cost: Vec<Vec<f64>> = contingency
            .iter()
            .map(|row| row.iter().map(|&c| -(c as f64)).collect())
            .collect();
        let row_to_col = hungarian_min(&cost);
        let mut raw_to_new = vec![0usize; k];
        for (new_label, &raw_label) in row_to_col.iter().enumerate() {
            raw_to_new[raw_label] = new_label;
        }
        let mut aligned = cur.clone();
        for l in aligned.labels.iter_mut() {
            *l = raw_to_new[*l];
        }
        out.push(aligned);
    }
    Ok(out)
}

/// Builds trajectories from aligned per-timestep assignments, one per node.
pub fn trajectories(node_ids: &[String], aligned: &[ClusterAssignment]) -> Vec<LabelTrajectory> {
    node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| LabelTrajectory {
            node_id: id.clone(),
            labels: aligned.iter().map(|a| a.labels[i]).collect(),
        })
        .collect()
}

/// Groups nodes by exact signature equality, dropping groups smaller than
/// `min_size` into the `dropped` list. Retained archetypes are numbered by
/// descending size (ties by signature), so the result does not depend on the
/// input ordering of the trajectories.
pub fn merge_archetypes(trajectories: &[LabelTrajectory], min_size: usize) -> ArchetypeTable {
    let mut groups: BTreeMap<Vec<usize>, Vec<String>> = BTreeMap::new();
    for t in trajectories {
        groups.entry(t.labels.clone()).or_default().push(t.node_id.clone());
    }
    let mut all: Vec<(Vec<usize>, Vec<String>)> = groups.into_iter().collect();
    for (_, members) in &mut all {
        members.sort();
    }
    all.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut archetypes = Vec::new();
    let mut dropped = Vec::new();
    let mut next_id = 0usize;
    for (signature, members) in all {
        let arc = Archetype {
            id: next_id,
            signature,
            members,
        };
        next_id += 1;
        if arc.size() >= min_size {
            archetypes.push(arc);
        } else {
            dropped.push(arc);
        }
    }
    ArchetypeTable {
        archetypes,
        min_size,
        dropped,
    }
}

fn hamming(a: &[usize], b: &[usize]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Optional post-pass merging archetype pairs whose signatures differ in at
/// most `hamming_threshold` timesteps, absorbing the smaller into the larger
/// (which keeps its id and signature). Merges apply in descending-size
/// order; threshold 0 disables the pass.
pub fn fuse_similar(table: &ArchetypeTable, hamming_threshold: usize) -> ArchetypeTable {
    if hamming_threshold == 0 || table.archetypes.len() < 2 {
        return table.clone();
    }
    let mut arcs = table.archetypes.clone();
    loop {
        // (absorber size desc, absorbed size desc, absorber id asc, absorbed id asc)
        let mut best: Option<(usize, usize)> = None;
        for i in 0..arcs.len() {
            for j in 0..arcs.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (&arcs[i], &arcs[j]);
                if a.size() < b.size() || (a.size() == b.size() && a.id > b.id) {
                    continue;
                }
                if hamming(&a.signature, &b.signature) > hamming_threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        let key = |x: &Archetype, y: &Archetype| {
                            (x.size(), y.size(), usize::MAX - x.id, usize::MAX - y.id)
                        };
                        key(a, b) > key(&arcs[bi], &arcs[bj])
                    }
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        match best {
            None => break,
            Some((i, j)) => {
                let absorbed = arcs.remove(j);
                let i = if j < i { i - 1 } else { i };
                arcs[i].members.extend(absorbed.members);
                arcs[i].members.sort();
            }
        }
    }
    ArchetypeTable {
        archetypes: arcs,
        min_size: table.min_size,
        dropped: table.dropped.clone(),
    }
}
