//! End-to-end batch orchestration.
//!
//! Stages run features → embed → cluster → validate → archetype → stats,
//! each reading its inputs from disk and persisting its outputs, so any
//! downstream stage can be re-run alone and reproduce its files exactly.

pub mod manifest;
pub mod synth;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archetype::{align_labels, fuse_similar, merge_archetypes, Archetype, ArchetypeTable};
use crate::cluster::{fit, mix_seed, ClusterAssignment, ClusterParams, Method};
use crate::embed::{embed, project_2d, EmbeddingMatrix, SolverConfig};
use crate::error::{Error, Result};
use crate::features::{standardize, AttributeTable};
use crate::graph::{build_network, AttributedNetwork};
use crate::io::{
    fmt_g12, read_assignments, read_attribute_table, read_edge_records, read_embedding,
    write_assignments, write_attribute_table, write_embedding, write_text, write_trace,
    AssignmentRow, CsvWriter,
};
use crate::stats::{feature_difference_scan, Correction};
use crate::validate::{silhouette, stability, SilhouetteReport, StabilityReport, StabilityRow};

pub use manifest::{FileDigest, RunManifest, StageTiming};
pub use synth::{generate_synthetic, SynthDataset, SynthSpec};

/// Seed tag for the stability replicas, kept apart from the sweep fits.
const STABILITY_TAG: u64 = 0x57ab;

/// Resolved run configuration. The global `seed` drives every stage; the
/// per-(timestep, K, method) fit seeds are derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub timesteps: usize,
    pub seed: u64,
    /// Inclusive sweep bounds for the cluster count.
    pub k_range: (usize, usize),
    pub methods: Vec<Method>,
    pub min_archetype_size: usize,
    /// Hamming threshold of the optional archetype fusion pass (0 disables).
    pub fuse_threshold: usize,
    pub alpha: f64,
    pub correction: Correction,
    /// Worker threads (0 leaves the rayon default); applied by the CLI.
    pub threads: usize,
    /// Pins the cluster count instead of the silhouette argmax.
    pub k_override: Option<usize>,
    /// Pins the method instead of the stability winner.
    pub method_override: Option<Method>,
    pub solver: SolverConfig,
    pub cluster: ClusterParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            timesteps: 1,
            seed: 42,
            k_range: (2, 6),
            methods: vec![Method::KMeans, Method::Gmm],
            min_archetype_size: 20,
            fuse_threshold: 0,
            alpha: 0.05,
            correction: Correction::Holm,
            threads: 0,
            k_override: None,
            method_override: None,
            solver: SolverConfig::default(),
            cluster: ClusterParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be >= 1".into()));
        }
        if self.k_range.0 < 2 || self.k_range.1 < self.k_range.0 {
            return Err(Error::Config(format!(
                "k range ({}, {}) must satisfy 2 <= low <= high",
                self.k_range.0, self.k_range.1
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one clustering method required".into()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        self.solver.validate()
    }

    pub fn load_toml(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn week_input(&self, t: usize, file: &str) -> PathBuf {
        self.input_dir.join(format!("week_{t}")).join(file)
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.output_dir.join(rel)
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Input(format!("missing input file {}", path.display())))
    }
}

fn log(msg: &str) {
    match std::env::var("NETARCH_LOG").as_deref() {
        Ok("quiet") | Ok("off") => {}
        _ => eprintln!("[netarch] {msg}"),
    }
}

/// Reads and validates the raw attribute tables: every week must exist and
/// share week 0's node universe (rows are reordered to week 0's order).
fn load_raw_attributes(cfg: &PipelineConfig) -> Result<Vec<AttributeTable>> {
    let mut tables = Vec::with_capacity(cfg.timesteps);
    for t in 0..cfg.timesteps {
        let path = cfg.week_input(t, "attributes.csv");
        require(&path)?;
        tables.push(read_attribute_table(&path, t)?);
    }
    let canonical = tables[0].node_ids().to_vec();
    let mut reordered = Vec::with_capacity(tables.len());
    for table in tables {
        if table.node_ids() == canonical.as_slice() {
            reordered.push(table);
            continue;
        }
        let index: HashMap<&str, usize> = table
            .node_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        if table.n_nodes() != canonical.len() {
            return Err(Error::Input(format!(
                "week {} has {} nodes, week 0 has {}",
                table.timestep(),
                table.n_nodes(),
                canonical.len()
            )));
        }
        let mut rows = Vec::with_capacity(canonical.len());
        for id in &canonical {
            let &i = index.get(id.as_str()).ok_or_else(|| {
                Error::Input(format!(
                    "node `{id}` missing from week {} attributes",
                    table.timestep()
                ))
            })?;
            rows.push(table.values().row(i).to_vec());
        }
        reordered.push(AttributeTable::new(
            canonical.clone(),
            table.feature_names().to_vec(),
            crate::linalg::Matrix::from_rows(&rows),
            table.timestep(),
        )?);
    }
    Ok(reordered)
}

/// features stage: impute missing values by the column median, standardize,
/// persist one table per week.
pub fn stage_features(cfg: &PipelineConfig) -> Result<Vec<AttributeTable>> {
    let raw = load_raw_attributes(cfg)?;
    let mut out = Vec::with_capacity(raw.len());
    for table in raw {
        let prepared = standardize(&table.impute_median());
        write_attribute_table(&cfg.out(&format!("features/week_{}.csv", prepared.timestep())), &prepared)?;
        out.push(prepared);
    }
    log(&format!("features: {} weeks standardized", out.len()));
    Ok(out)
}

fn load_features(cfg: &PipelineConfig) -> Result<Vec<AttributeTable>> {
    (0..cfg.timesteps)
        .map(|t| {
            let path = cfg.out(&format!("features/week_{t}.csv"));
            require(&path)?;
            read_attribute_table(&path, t)
        })
        .collect()
}

fn load_networks(cfg: &PipelineConfig, features: &[AttributeTable]) -> Result<Vec<AttributedNetwork>> {
    features
        .iter()
        .map(|table| {
            let path = cfg.week_input(table.timestep(), "edges.csv");
            require(&path)?;
            let records = read_edge_records(&path)?;
            build_network(&records, table.clone())
        })
        .collect()
}

/// embed stage: builds every week's network (validating all edge endpoints
/// before any solve starts) and runs the solver per week.
pub fn stage_embed(cfg: &PipelineConfig) -> Result<Vec<EmbeddingMatrix>> {
    let features = load_features(cfg)?;
    let networks = load_networks(cfg, &features)?;
    let results: Vec<(EmbeddingMatrix, crate::embed::SolverTrace)> = networks
        .par_iter()
        .map(|net| embed(net, &cfg.solver))
        .collect::<Result<_>>()?;
    for (net, (emb, trace)) in networks.iter().zip(&results) {
        let t = net.timestep();
        write_embedding(&cfg.out(&format!("embeddings/week_{t}.csv")), emb)?;
        write_trace(&cfg.out(&format!("embeddings/week_{t}_trace.csv")), trace)?;
        if emb.dimension() >= 2 {
            let proj = project_2d(emb)?;
            let mut w = CsvWriter::create(&cfg.out(&format!("embeddings/week_{t}_2d.csv")))?;
            w.row(&["node_id", "x", "y"])?;
            for (i, id) in emb.node_ids().iter().enumerate() {
                w.row(&[id.clone(), fmt_g12(proj[(i, 0)]), fmt_g12(proj[(i, 1)])])?;
            }
            w.finish()?;
        }
        if !trace.converged {
            log(&format!(
                "embed: week {t} stopped at residual {:.3e} after {} iterations",
                trace.residual.last().copied().unwrap_or(f64::NAN),
                trace.iterations
            ));
        }
    }
    log(&format!("embed: {} weeks embedded (d={})", results.len(), cfg.solver.dimension));
    Ok(results.into_iter().map(|(e, _)| e).collect())
}

fn load_embeddings(cfg: &PipelineConfig) -> Result<Vec<EmbeddingMatrix>> {
    (0..cfg.timesteps)
        .map(|t| {
            let path = cfg.out(&format!("embeddings/week_{t}.csv"));
            require(&path)?;
            read_embedding(&path)
        })
        .collect()
}

/// Fit seed shared by the cluster stage and the silhouette sweep.
fn fit_params(cfg: &PipelineConfig, t: usize, k: usize, method_index: usize) -> ClusterParams {
    let mut params = cfg.cluster.clone();
    params.seed = mix_seed(cfg.seed, &[t as u64, k as u64, method_index as u64]);
    params
}

/// cluster stage: fits every (timestep, K, method) combination and persists
/// the canonicalized assignments.
pub fn stage_cluster(cfg: &PipelineConfig) -> Result<Vec<AssignmentRow>> {
    let embeddings = load_embeddings(cfg)?;
    let combos: Vec<(usize, usize, usize)> = (0..cfg.timesteps)
        .flat_map(|t| {
            (cfg.k_range.0..=cfg.k_range.1)
                .flat_map(move |k| (0..cfg.methods.len()).map(move |mi| (t, k, mi)))
        })
        .collect();
    let fitted: Vec<ClusterAssignment> = combos
        .par_iter()
        .map(|&(t, k, mi)| {
            let mut assign = fit(cfg.methods[mi], &embeddings[t], k, &fit_params(cfg, t, k, mi))?;
            assign.timestep = t;
            Ok(assign)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for assign in &fitted {
        let ids = embeddings[assign.timestep].node_ids();
        for (i, &label) in assign.labels.iter().enumerate() {
            rows.push(AssignmentRow {
                node_id: ids[i].clone(),
                timestep: assign.timestep,
                method: assign.method,
                k: assign.k,
                label,
            });
        }
    }
    write_assignments(&cfg.out("clusters/assignments.csv"), &rows)?;
    log(&format!("cluster: {} fits persisted", fitted.len()));
    Ok(rows)
}

/// The (K, method) pair a run settled on, with the unconstrained argmax kept
/// alongside any configured override.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub silhouette_k: usize,
    pub selected_k: usize,
    pub stability_method: Method,
    pub selected_method: Method,
}

fn labels_for(
    rows: &[AssignmentRow],
    index: &HashMap<String, usize>,
    t: usize,
    k: usize,
    method: Method,
) -> Result<Vec<usize>> {
    let mut labels = vec![usize::MAX; index.len()];
    for row in rows {
        if row.timestep == t && row.k == k && row.method == method {
            let &i = index.get(&row.node_id).ok_or_else(|| {
                Error::Input(format!("assignment for unknown node `{}`", row.node_id))
            })?;
            labels[i] = row.label;
        }
    }
    if labels.iter().any(|&l| l == usize::MAX) {
        return Err(Error::Input(format!(
            "incomplete assignments for week {t}, k={k}, method={method}"
        )));
    }
    Ok(labels)
}

/// validate stage: silhouette table over the persisted fits, stability
/// comparison at the selected K, and the (K*, method*) selection record.
pub fn stage_validate(cfg: &PipelineConfig) -> Result<(SilhouetteReport, StabilityReport, Selection)> {
    let embeddings = load_embeddings(cfg)?;
    let rows = read_assignments(&cfg.out("clusters/assignments.csv"))?;
    let index: HashMap<String, usize> = embeddings[0]
        .node_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();

    let k_values: Vec<usize> = (cfg.k_range.0..=cfg.k_range.1).collect();
    let mut per_timestep = Vec::with_capacity(cfg.timesteps);
    for t in 0..cfg.timesteps {
        let mut table = vec![vec![0.0; cfg.methods.len()]; k_values.len()];
        for (ki, &k) in k_values.iter().enumerate() {
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let labels = labels_for(&rows, &index, t, k, method)?;
                let (_, avg) = silhouette(embeddings[t].values(), &labels)?;
                table[ki][mi] = avg;
            }
        }
        per_timestep.push(table);
    }
    let mut averaged = vec![vec![0.0; cfg.methods.len()]; k_values.len()];
    for table in &per_timestep {
        for (ki, row) in table.iter().enumerate() {
            for (mi, v) in row.iter().enumerate() {
                averaged[ki][mi] += v / cfg.timesteps as f64;
            }
        }
    }
    let report = SilhouetteReport {
        k_values: k_values.clone(),
        methods: cfg.methods.clone(),
        per_timestep,
        averaged,
    };

    // Table of week-averaged silhouettes: one row per K, one column per method.
    let mut w = CsvWriter::create(&cfg.out("validate/silhouette.csv"))?;
    let mut header = vec!["k".to_string()];
    header.extend(cfg.methods.iter().map(|m| m.to_string()));
    w.row(&header)?;
    for (ki, &k) in report.k_values.iter().enumerate() {
        let mut fields = vec![k.to_string()];
        fields.extend(report.averaged[ki].iter().map(|&v| fmt_g12(v)));
        w.row(&fields)?;
    }
    w.finish()?;

    let mut w = CsvWriter::create(&cfg.out("validate/silhouette_by_week.csv"))?;
    w.row(&["timestep", "k", "method", "avg_silhouette"])?;
    for (t, table) in report.per_timestep.iter().enumerate() {
        for (ki, &k) in report.k_values.iter().enumerate() {
            for (mi, method) in cfg.methods.iter().enumerate() {
                w.row(&[
                    t.to_string(),
                    k.to_string(),
                    method.to_string(),
                    fmt_g12(table[ki][mi]),
                ])?;
            }
        }
    }
    w.finish()?;

    let series: Vec<(String, Vec<(f64, f64)>)> = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            (
                m.to_string(),
                report
                    .k_values
                    .iter()
                    .enumerate()
                    .map(|(ki, &k)| (k as f64, report.averaged[ki][mi]))
                    .collect(),
            )
        })
        .collect();
    write_text(
        &cfg.out("validate/silhouette.svg"),
        &crate::plot::line_chart("Average silhouette by cluster count", "K", "avg silhouette", &series),
    )?;

    let (silhouette_k, _) = report.best_overall();
    let selected_k = cfg.k_override.unwrap_or(silhouette_k);

    // Stability at the selected K, averaged over weeks.
    let features = load_features(cfg)?;
    let networks = load_networks(cfg, &features)?;
    let week_reports: Vec<StabilityReport> = networks
        .par_iter()
        .map(|net| {
            let mut params = cfg.cluster.clone();
            params.seed = mix_seed(cfg.seed, &[net.timestep() as u64, STABILITY_TAG]);
            stability(net, &cfg.solver, &params, selected_k, &cfg.methods)
        })
        .collect::<Result<_>>()?;
    let mut rows_out = Vec::with_capacity(cfg.methods.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let mut acc = [0.0f64; 4];
        for rep in &week_reports {
            acc[0] += rep.rows[mi].apn;
            acc[1] += rep.rows[mi].ad;
            acc[2] += rep.rows[mi].adm;
            acc[3] += rep.rows[mi].fom;
        }
        let t = cfg.timesteps as f64;
        rows_out.push(StabilityRow {
            method,
            apn: acc[0] / t,
            ad: acc[1] / t,
            adm: acc[2] / t,
            fom: acc[3] / t,
        });
    }
    let stability_report = StabilityReport { rows: rows_out };

    let mut w = CsvWriter::create(&cfg.out("validate/stability.csv"))?;
    w.row(&["method", "apn", "ad", "adm", "fom"])?;
    for row in &stability_report.rows {
        w.row(&[
            row.method.to_string(),
            fmt_g12(row.apn),
            fmt_g12(row.ad),
            fmt_g12(row.adm),
            fmt_g12(row.fom),
        ])?;
    }
    w.finish()?;

    let stability_method = stability_report.best_method();
    let selected_method = cfg.method_override.unwrap_or(stability_method);
    let selection = Selection {
        silhouette_k,
        selected_k,
        stability_method,
        selected_method,
    };
    let mut w = CsvWriter::create(&cfg.out("validate/selection.csv"))?;
    w.row(&["silhouette_k", "selected_k", "stability_method", "selected_method"])?;
    w.row(&[
        selection.silhouette_k.to_string(),
        selection.selected_k.to_string(),
        selection.stability_method.to_string(),
        selection.selected_method.to_string(),
    ])?;
    w.finish()?;

    log(&format!(
        "validate: K* = {} ({}), method* = {} ({})",
        selection.selected_k,
        if cfg.k_override.is_some() { "pinned" } else { "silhouette argmax" },
        selection.selected_method,
        if cfg.method_override.is_some() { "pinned" } else { "stability winner" },
    ));
    Ok((report, stability_report, selection))
}

fn load_selection(cfg: &PipelineConfig) -> Result<Selection> {
    let path = cfg.out("validate/selection.csv");
    require(&path)?;
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let line = text
        .lines()
        .nth(1)
        .ok_or_else(|| Error::Input(format!("{}: missing data row", path.display())))?;
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(Error::Input(format!("{}: expected 4 columns", path.display())));
    }
    let parse = |f: &str| -> Result<usize> {
        f.parse()
            .map_err(|_| Error::Input(format!("{}: bad integer `{f}`", path.display())))
    };
    Ok(Selection {
        silhouette_k: parse(fields[0])?,
        selected_k: parse(fields[1])?,
        stability_method: fields[2].parse()?,
        selected_method: fields[3].parse()?,
    })
}

/// archetype stage: aligns the selected clustering across weeks, merges
/// identical trajectories, applies the size filter and the optional fusion
/// pass, and persists the table.
pub fn stage_archetype(cfg: &PipelineConfig) -> Result<ArchetypeTable> {
    let selection = load_selection(cfg)?;
    let features = load_features(cfg)?;
    let node_ids = features[0].node_ids().to_vec();
    let index: HashMap<String, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    let rows = read_assignments(&cfg.out("clusters/assignments.csv"))?;

    let assignments: Vec<ClusterAssignment> = (0..cfg.timesteps)
        .map(|t| {
            let labels = labels_for(&rows, &index, t, selection.selected_k, selection.selected_method)?;
            Ok(ClusterAssignment {
                timestep: t,
                labels,
                k: selection.selected_k,
                method: selection.selected_method,
                score: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let aligned = align_labels(&assignments)?;

    let mut aligned_rows = Vec::new();
    for assign in &aligned {
        for (i, &label) in assign.labels.iter().enumerate() {
            aligned_rows.push(AssignmentRow {
                node_id: node_ids[i].clone(),
                timestep: assign.timestep,
                method: assign.method,
                k: assign.k,
                label,
            });
        }
    }
    write_assignments(&cfg.out("archetypes/aligned_assignments.csv"), &aligned_rows)?;

    let trajectories = crate::archetype::trajectories(&node_ids, &aligned);
    let table = merge_archetypes(&trajectories, cfg.min_archetype_size);
    let table = fuse_similar(&table, cfg.fuse_threshold);

    let write_members = |path: &Path, arcs: &[Archetype]| -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&["archetype_id", "signature", "node_id"])?;
        for arc in arcs {
            for member in &arc.members {
                w.row(&[arc.id.to_string(), arc.signature_string(), member.clone()])?;
            }
        }
        w.finish()
    };
    write_members(&cfg.out("archetypes/archetypes.csv"), &table.archetypes)?;
    write_members(&cfg.out("archetypes/dropped.csv"), &table.dropped)?;

    let mut w = CsvWriter::create(&cfg.out("archetypes/summary.csv"))?;
    w.row(&["archetype_id", "signature", "size", "retained"])?;
    for arc in table.archetypes.iter() {
        w.row(&[arc.id.to_string(), arc.signature_string(), arc.size().to_string(), "1".into()])?;
    }
    for arc in table.dropped.iter() {
        w.row(&[arc.id.to_string(), arc.signature_string(), arc.size().to_string(), "0".into()])?;
    }
    w.finish()?;

    write_text(
        &cfg.out("archetypes/timeline.svg"),
        &crate::plot::archetype_timeline(&table),
    )?;
    log(&format!(
        "archetype: {} retained, {} dropped (min size {})",
        table.archetypes.len(),
        table.dropped.len(),
        cfg.min_archetype_size
    ));
    Ok(table)
}

fn load_archetypes(cfg: &PipelineConfig) -> Result<ArchetypeTable> {
    let read_members = |path: &Path| -> Result<Vec<Archetype>> {
        require(path)?;
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut arcs: Vec<Archetype> = Vec::new();
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Input(format!("{}: expected 3 columns", path.display())));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| Error::Input(format!("{}: bad archetype id", path.display())))?;
            let signature: Vec<usize> = fields[1]
                .split('-')
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Input(format!("{}: bad signature", path.display())))
                })
                .collect::<Result<_>>()?;
            match arcs.iter_mut().find(|a| a.id == id) {
                Some(arc) => arc.members.push(fields[2].to_string()),
                None => arcs.push(Archetype {
                    id,
                    signature,
                    members: vec![fields[2].to_string()],
                }),
            }
        }
        Ok(arcs)
    };
    Ok(ArchetypeTable {
        archetypes: read_members(&cfg.out("archetypes/archetypes.csv"))?,
        min_size: cfg.min_archetype_size,
        dropped: read_members(&cfg.out("archetypes/dropped.csv"))?,
    })
}

/// stats stage: Kruskal-Wallis per (week, feature) over archetype groups,
/// Dunn's post hoc on the significant cells, plus summary and heatmap.
pub fn stage_stats(cfg: &PipelineConfig) -> Result<crate::stats::FeatureTestReport> {
    let features = load_features(cfg)?;
    let table = load_archetypes(cfg)?;
    let report = feature_difference_scan(&features, &table, cfg.alpha, cfg.correction)?;

    let mut w = CsvWriter::create(&cfg.out("stats/tests.csv"))?;
    w.row(&["timestep", "feature", "h", "df", "p_value", "significant"])?;
    for t in &report.tests {
        w.row(&[
            t.timestep.to_string(),
            t.feature.clone(),
            fmt_g12(t.h),
            t.df.to_string(),
            fmt_g12(t.p),
            if t.significant { "1" } else { "0" }.to_string(),
        ])?;
    }
    w.finish()?;

    let mut w = CsvWriter::create(&cfg.out("stats/nonsignificant.csv"))?;
    w.row(&["timestep", "feature", "statistic", "p_value"])?;
    for t in report.non_significant() {
        w.row(&[
            t.timestep.to_string(),
            t.feature.clone(),
            fmt_g12(t.h),
            fmt_g12(t.p),
        ])?;
    }
    w.finish()?;

    let mut w = CsvWriter::create(&cfg.out("stats/posthoc.csv"))?;
    w.row(&[
        "timestep",
        "feature",
        "archetype_a",
        "archetype_b",
        "z",
        "p_raw",
        "p_adjusted",
        "significant",
    ])?;
    for rec in &report.posthoc {
        w.row(&[
            rec.timestep.to_string(),
            rec.feature.clone(),
            rec.pair.0.to_string(),
            rec.pair.1.to_string(),
            fmt_g12(rec.z),
            fmt_g12(rec.p_raw),
            fmt_g12(rec.p_adjusted),
            if rec.significant { "1" } else { "0" }.to_string(),
        ])?;
    }
    w.finish()?;

    let summaries = report.summaries();
    let mut w = CsvWriter::create(&cfg.out("stats/summary.csv"))?;
    w.row(&["feature", "significant_weeks", "total_weeks", "all_weeks"])?;
    for s in &summaries {
        w.row(&[
            s.feature.clone(),
            s.significant_weeks.to_string(),
            s.total_weeks.to_string(),
            if s.significant_weeks == s.total_weeks { "1" } else { "0" }.to_string(),
        ])?;
    }
    w.finish()?;

    let feature_names: Vec<String> = summaries.iter().map(|s| s.feature.clone()).collect();
    let timesteps: Vec<usize> = (0..cfg.timesteps).collect();
    let p_matrix: Vec<Vec<f64>> = feature_names
        .iter()
        .map(|f| {
            timesteps
                .iter()
                .map(|&t| {
                    report
                        .tests
                        .iter()
                        .find(|x| x.feature == *f && x.timestep == t)
                        .map_or(1.0, |x| x.p)
                })
                .collect()
        })
        .collect();
    write_text(
        &cfg.out("stats/heatmap.svg"),
        &crate::plot::significance_heatmap(&feature_names, &timesteps, &p_matrix, cfg.alpha),
    )?;
    log(&format!(
        "stats: {} cells tested, {} non-significant",
        report.tests.len(),
        report.non_significant().len()
    ));
    Ok(report)
}

/// Runs every stage in order and writes the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let inputs = manifest::digest_tree(&cfg.input_dir, &[])?;
    if inputs.is_empty() {
        return Err(Error::Input(format!(
            "no input files under {}",
            cfg.input_dir.display()
        )));
    }

    let mut stages = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let start = Instant::now();
        f()?;
        stages.push(StageTiming {
            stage: name.to_string(),
            millis: start.elapsed().as_millis() as u64,
        });
        Ok(())
    };

    run("features", &mut || stage_features(cfg).map(|_| ()))?;
    run("embed", &mut || stage_embed(cfg).map(|_| ()))?;
    run("cluster", &mut || stage_cluster(cfg).map(|_| ()))?;
    run("validate", &mut || stage_validate(cfg).map(|_| ()))?;
    run("archetype", &mut || stage_archetype(cfg).map(|_| ()))?;
    run("stats", &mut || stage_stats(cfg).map(|_| ()))?;

    let config_sha256 = manifest::sha256_bytes(
        toml::to_string(cfg)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?
            .as_bytes(),
    );
    let outputs = manifest::digest_tree(&cfg.output_dir, &["manifest.json"])?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256,
        inputs,
        stages,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    write_text(&cfg.out("manifest.json"), &json)?;
    log("pipeline: complete");
    Ok(manifest)
}
