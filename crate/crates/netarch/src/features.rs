//! Derived node features: Venables distance, reproduction number, weighted
//! degree centralities, percentage change from baseline, and attribute-table
//! standardization.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default serial interval (days) used when estimating the reproduction number.
pub const DEFAULT_TAU_DAYS: f64 = 5.1;

/// A cell of spatial activity: planar position in meters plus a nonnegative intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
}

/// Daily activity intensities on a planar grid.
#[derive(Debug, Clone)]
pub struct ActivityGrid {
    cells: Vec<GridCell>,
}

impl ActivityGrid {
    /// Rejects negative intensities; positions are taken as given.
    pub fn new(cells: Vec<GridCell>) -> Result<Self> {
        for (i, c) in cells.iter().enumerate() {
            if !(c.intensity >= 0.0) || !c.x.is_finite() || !c.y.is_finite() {
                return Err(Error::Input(format!(
                    "activity grid cell {i}: intensity must be finite and >= 0"
                )));
            }
        }
        Ok(ActivityGrid { cells })
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }
}

/// Intensity-weighted mean pairwise distance of the activity cells (meters).
///
/// Invariant under uniform intensity scaling and rigid motion of the cells.
pub fn venables_distance(grid: &ActivityGrid) -> Result<f64> {
    let active: Vec<&GridCell> = grid.cells.iter().filter(|c| c.intensity > 0.0).collect();
    if active.len() < 2 {
        return Err(Error::DegenerateGrid);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..active.len() {
        for j in i + 1..active.len() {
            let w = active[i].intensity * active[j].intensity;
            let dx = active[i].x - active[j].x;
            let dy = active[i].y - active[j].y;
            num += w * (dx * dx + dy * dy).sqrt();
            den += w;
        }
    }
    Ok(num / den)
}

/// Cumulative confirmed-case counts at a fixed cadence of `step_days` per index.
#[derive(Debug, Clone)]
pub struct CaseSeries {
    counts: Vec<u64>,
    step_days: f64,
}

impl CaseSeries {
    /// Counts must be non-decreasing (they are cumulative).
    pub fn new(counts: Vec<u64>, step_days: f64) -> Result<Self> {
        if !(step_days > 0.0) {
            return Err(Error::Input("case series step must be positive".into()));
        }
        for w in counts.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Input(
                    "cumulative case counts must be non-decreasing".into(),
                ));
            }
        }
        Ok(CaseSeries { counts, step_days })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn step_days(&self) -> f64 {
        self.step_days
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Reproduction number over `window = (start, end)` index pair: e^{Kτ} with
/// K = (ln i(t) − ln i(0)) / t and t the window length in days.
pub fn reproduction_number(series: &CaseSeries, window: (usize, usize), tau_days: f64) -> Result<f64> {
    let (start, end) = window;
    if end <= start || end >= series.counts.len() {
        return Err(Error::Input(format!(
            "invalid window ({start}, {end}) for series of length {}",
            series.counts.len()
        )));
    }
    if !(tau_days > 0.0) {
        return Err(Error::Input("tau must be positive".into()));
    }
    let i0 = series.counts[start];
    let it = series.counts[end];
    if i0 == 0 || it == 0 {
        return Err(Error::ZeroCases);
    }
    let t = (end - start) as f64 * series.step_days;
    let k = ((it as f64).ln() - (i0 as f64).ln()) / t;
    Ok((k * tau_days).exp())
}

/// Symmetric nonnegative pairwise index (e.g. social connectedness, colocation).
#[derive(Debug, Clone)]
pub struct PairwiseIndexMatrix {
    values: Matrix,
    node_ids: Vec<String>,
}

impl PairwiseIndexMatrix {
    /// Validates squareness, nonnegativity, and symmetry within 1e-12
    /// relative tolerance (absolute near zero).
    pub fn new(values: Matrix, node_ids: Vec<String>) -> Result<Self> {
        let n = node_ids.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::Input(format!(
                "pairwise matrix is {}x{} but {} node ids given",
                values.nrows(),
                values.ncols(),
                n
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                let a = values[(i, j)];
                let b = values[(j, i)];
                let dev = (a - b).abs();
                let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
                if dev > tol {
                    return Err(Error::AsymmetricMatrix { i, j, deviation: dev });
                }
            }
            if values[(i, i)] < 0.0 {
                return Err(Error::Input(format!("negative diagonal at {i}")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && values[(i, j)] < 0.0 {
                    return Err(Error::Input(format!("negative entry at ({i}, {j})")));
                }
            }
        }
        Ok(PairwiseIndexMatrix { values, node_ids })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }
}

/// Weighted degree centrality: entry i is the off-diagonal row sum.
pub fn weighted_degree_centrality(m: &PairwiseIndexMatrix) -> Vec<f64> {
    let n = m.node_ids.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += m.values[(i, j)];
            }
        }
        out[i] = s;
    }
    out
}

/// Percentage change relative to the value at `baseline`: out[t] = (x[t] − x[b]) / x[b].
pub fn percent_change_from_baseline(series: &[f64], baseline: usize) -> Result<Vec<f64>> {
    if baseline >= series.len() {
        return Err(Error::Input(format!(
            "baseline index {baseline} out of range for series of length {}",
            series.len()
        )));
    }
    let b = series[baseline];
    if b == 0.0 {
        return Err(Error::ZeroBaseline(baseline));
    }
    Ok(series.iter().map(|&x| (x - b) / b).collect())
}

/// Node-by-feature table for one timestep. Missing values are NaN until imputed.
#[derive(Debug, Clone)]
pub struct AttributeTable {
    node_ids: Vec<String>,
    feature_names: Vec<String>,
    /// Row-major n × m values, aligned with `node_ids` and `feature_names`.
    values: Matrix,
    timestep: usize,
}

impl AttributeTable {
    pub fn new(
        node_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Matrix,
        timestep: usize,
    ) -> Result<Self> {
        if values.nrows() != node_ids.len() || values.ncols() != feature_names.len() {
            return Err(Error::Input(format!(
                "attribute table shape {}x{} does not match {} nodes x {} features",
                values.nrows(),
                values.ncols(),
                node_ids.len(),
                feature_names.len()
            )));
        }
        Ok(AttributeTable {
            node_ids,
            feature_names,
            values,
            timestep,
        })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.values[(i, j)]).collect()
    }

    /// Index of a node id, if present.
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    /// Replaces NaN entries by the per-column median of the observed values.
    /// A column with no observed values becomes all zero.
    pub fn impute_median(&self) -> AttributeTable {
        let n = self.n_nodes();
        let m = self.n_features();
        let mut values = self.values.clone();
        for j in 0..m {
            let mut observed: Vec<f64> = (0..n)
                .map(|i| self.values[(i, j)])
                .filter(|v| !v.is_nan())
                .collect();
            let fill = if observed.is_empty() {
                0.0
            } else {
                observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let k = observed.len();
                if k % 2 == 1 {
                    observed[k / 2]
                } else {
                    0.5 * (observed[k / 2 - 1] + observed[k / 2])
                }
            };
            for i in 0..n {
                if values[(i, j)].is_nan() {
                    values[(i, j)] = fill;
                }
            }
        }
        AttributeTable {
            node_ids: self.node_ids.clone(),
            feature_names: self.feature_names.clone(),
            values,
            timestep: self.timestep,
        }
    }

    /// Returns a copy without feature column `j`.
    pub fn without_column(&self, j: usize) -> AttributeTable {
        assert!(j < self.n_features());
        let n = self.n_nodes();
        let m = self.n_features();
        let mut values = Matrix::zeros(n, m - 1);
        for i in 0..n {
            let mut c = 0;
            for k in 0..m {
                if k != j {
                    values[(i, c)] = self.values[(i, k)];
                    c += 1;
                }
            }
        }
        let feature_names = self
            .feature_names
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, s)| s.clone())
            .collect();
        AttributeTable {
            node_ids: self.node_ids.clone(),
            feature_names,
            values,
            timestep: self.timestep,
        }
    }
}

/// Z-standardizes each column under the population (1/n) variance convention.
/// Constant columns map to all zero so downstream cosine similarity stays defined.
pub fn standardize(table: &AttributeTable) -> AttributeTable {
    let n = table.n_nodes();
    let m = table.n_features();
    let mut values = table.values.clone();
    for j in 0..m {
        let mut mean = 0.0;
        for i in 0..n {
            mean += values[(i, j)];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let d = values[(i, j)] - mean;
            var += d * d;
        }
        var /= n as f64;
        if var > 0.0 {
            let sd = var.sqrt();
            for i in 0..n {
                values[(i, j)] = (values[(i, j)] - mean) / sd;
            }
        } else {
            for i in 0..n {
                values[(i, j)] = 0.0;
            }
        }
    }
    AttributeTable {
        node_ids: table.node_ids.clone(),
        feature_names: table.feature_names.clone(),
        values,
        timestep: table.timestep,
    }
}
