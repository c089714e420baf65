//! Nonparametric detection of feature differences across archetypes:
//! Kruskal-Wallis omnibus test with midrank tie handling, and Dunn's
//! pairwise post hoc z test with multiplicity correction.

use crate::archetype::ArchetypeTable;
use crate::error::{Error, Result};
use crate::features::AttributeTable;

pub use crate::special::{chi_square_sf, normal_two_sided_p};

/// Midranks of the pooled values plus the tie term Σ(t³ − t).
///
/// Tied observations share the mean of the ranks they would occupy.
pub(crate) fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Kruskal-Wallis result.
#[derive(Debug, Clone, Copy)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub p: f64,
}

/// H = 12/(N(N+1)) Σ R_i²/n_i − 3(N+1), midranked and divided by the
/// standard tie-correction factor; p from the chi-square approximation with
/// K−1 degrees of freedom. A fully tied sample is reported as H = 0, p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "kruskal-wallis needs >= 2 groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::InsufficientData(format!("group {i} is empty")));
        }
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "kruskal-wallis needs N >= 3 pooled observations, got {n}"
        )));
    }
    let k = groups.len();
    let df = k - 1;

    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let first = pooled[0];
    if pooled.iter().all(|&v| v == first) {
        return Ok(KruskalWallis { h: 0.0, df, p: 1.0 });
    }

    let (ranks, tie_term) = midranks(&pooled);
    let nf = n as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    h = (h / correction).max(0.0);

    let p = chi_square_sf(h, df as f64);
    Ok(KruskalWallis { h, df, p })
}

/// Multiplicity correction applied to the post hoc p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    Holm,
    Bonferroni,
    None,
}

impl std::str::FromStr for Correction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "holm" => Ok(Correction::Holm),
            "bonferroni" => Ok(Correction::Bonferroni),
            "none" => Ok(Correction::None),
            other => Err(Error::Config(format!(
                "unknown correction `{other}` (expected holm, bonferroni, or none)"
            ))),
        }
    }
}

/// Adjusts raw p-values in place-order; output is index-aligned with input.
pub fn adjust_p_values(raw: &[f64], correction: Correction) -> Vec<f64> {
    let m = raw.len();
    match correction {
        Correction::None => raw.to_vec(),
        Correction::Bonferroni => raw.iter().map(|p| (p * m as f64).min(1.0)).collect(),
        Correction::Holm => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
            let mut adjusted = vec![0.0; m];
            let mut running_max = 0.0f64;
            for (rank, &idx) in order.iter().enumerate() {
                let scaled = (raw[idx] * (m - rank) as f64).min(1.0);
                running_max = running_max.max(scaled);
                adjusted[idx] = running_max;
            }
            adjusted
        }
    }
}

/// One pairwise comparison from Dunn's post hoc test.
#[derive(Debug, Clone, Copy)]
pub struct PairComparison {
    pub a: usize,
    pub b: usize,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Dunn's (1964) rank-based pairwise z comparisons:
/// z = (R̄_a − R̄_b) / sqrt((N(N+1)/12 − tie term/(12(N−1)))(1/n_a + 1/n_b)),
/// two-sided p-values adjusted by `correction`, flagged at `alpha`.
pub fn dunn_posthoc(
    groups: &[Vec<f64>],
    alpha: f64,
    correction: Correction,
) -> Result<Vec<PairComparison>> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "dunn post hoc needs >= 2 groups".into(),
        ));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::InsufficientData(format!("group {i} is empty")));
        }
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let nf = n as f64;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie_term) = midranks(&pooled);

    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        mean_ranks.push(r / g.len() as f64);
        offset += g.len();
    }

    let variance = nf * (nf + 1.0) / 12.0 - tie_term / (12.0 * (nf - 1.0));
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let inv = 1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64;
            let z = if variance > 0.0 {
                (mean_ranks[a] - mean_ranks[b]) / (variance * inv).sqrt()
            } else {
                0.0
            };
            let p = normal_two_sided_p(z);
            pairs.push((a, b, z));
            raw.push(p);
        }
    }
    let adjusted = adjust_p_values(&raw, correction);
    Ok(pairs
        .into_iter()
        .zip(raw)
        .zip(adjusted)
        .map(|(((a, b, z), p_raw), p_adjusted)| PairComparison {
            a,
            b,
            z,
            p_raw,
            p_adjusted,
            significant: p_adjusted < alpha,
        })
        .collect())
}

/// Omnibus result for one (timestep, feature) cell.
#[derive(Debug, Clone)]
pub struct FeatureTest {
    pub timestep: usize,
    pub feature: String,
    pub h: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
}

/// Post hoc record for one significant (timestep, feature) cell.
#[derive(Debug, Clone)]
pub struct PosthocRecord {
    pub timestep: usize,
    pub feature: String,
    /// Archetype ids being compared.
    pub pair: (usize, usize),
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Per-feature significance counts across timesteps.
#[derive(Debug, Clone)]
pub struct FeatureSummary {
    pub feature: String,
    pub significant_weeks: usize,
    pub total_weeks: usize,
}

/// Full scan output: omnibus tests, post hoc comparisons for the significant
/// cells, and the non-significant list.
#[derive(Debug, Clone)]
pub struct FeatureTestReport {
    pub alpha: f64,
    pub tests: Vec<FeatureTest>,
    pub posthoc: Vec<PosthocRecord>,
}

impl FeatureTestReport {
    /// Feature/week cells whose distributions do not significantly differ
    /// across archetypes.
    pub fn non_significant(&self) -> Vec<&FeatureTest> {
        self.tests.iter().filter(|t| !t.significant).collect()
    }

    pub fn summaries(&self) -> Vec<FeatureSummary> {
        let mut features: Vec<String> = Vec::new();
        for t in &self.tests {
            if !features.contains(&t.feature) {
                features.push(t.feature.clone());
            }
        }
        features
            .into_iter()
            .map(|f| {
                let cells: Vec<&FeatureTest> =
                    self.tests.iter().filter(|t| t.feature == f).collect();
                FeatureSummary {
                    feature: f,
                    significant_weeks: cells.iter().filter(|t| t.significant).count(),
                    total_weeks: cells.len(),
                }
            })
            .collect()
    }
}

/// Groups node feature values by archetype per timestep, runs the omnibus
/// test everywhere, and the post hoc test where the omnibus is significant.
pub fn feature_difference_scan(
    attributes: &[AttributeTable],
    table: &ArchetypeTable,
    alpha: f64,
    correction: Correction,
) -> Result<FeatureTestReport> {
    if table.archetypes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need >= 2 retained archetypes, got {}",
            table.archetypes.len()
        )));
    }
    if attributes.is_empty() {
        return Err(Error::Input("no attribute tables given".into()));
    }
    let feature_names = attributes[0].feature_names().to_vec();

    let mut tests = Vec::new();
    let mut posthoc = Vec::new();
    for attrs in attributes {
        if attrs.feature_names() != feature_names.as_slice() {
            return Err(Error::Input(format!(
                "timestep {} has a different feature set",
                attrs.timestep()
            )));
        }
        // Resolve member rows once per timestep.
        let mut member_rows: Vec<Vec<usize>> = Vec::with_capacity(table.archetypes.len());
        for arc in &table.archetypes {
            let mut rows = Vec::with_capacity(arc.members.len());
            for id in &arc.members {
                let idx = attrs.node_index(id).ok_or_else(|| {
                    Error::Input(format!(
                        "archetype member `{id}` missing from attributes at timestep {}",
                        attrs.timestep()
                    ))
                })?;
                rows.push(idx);
            }
            member_rows.push(rows);
        }

        for (j, feature) in feature_names.iter().enumerate() {
            let column = attrs.column(j);
            let groups: Vec<Vec<f64>> = member_rows
                .iter()
                .map(|rows| rows.iter().map(|&i| column[i]).collect())
                .collect();
            let kw = kruskal_wallis(&groups)?;
            let significant = kw.p < alpha;
            tests.push(FeatureTest {
                timestep: attrs.timestep(),
                feature: feature.clone(),
                h: kw.h,
                df: kw.df,
                p: kw.p,
                significant,
            });
            if significant {
                for cmp in dunn_posthoc(&groups, alpha, correction)? {
                    posthoc.push(PosthocRecord {
                        timestep: attrs.timestep(),
                        feature: feature.clone(),
                        pair: (table.archetypes[cmp.a].id, table.archetypes[cmp.b].id),
                        z: cmp.z,
                        p_raw: cmp.p_raw,
                        p_adjusted: cmp.p_adjusted,
                        significant: cmp.significant,
                    });
                }
            }
        }
    }
    Ok(FeatureTestReport {
        alpha,
        tests,
        posthoc,
    })
}
