//! Batch CLI driving the analysis stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netarch::cluster::Method;
use netarch::error::Result;
use netarch::pipeline::{
    generate_synthetic, run_pipeline, stage_archetype, stage_cluster, stage_embed,
    stage_features, stage_stats, stage_validate, PipelineConfig, SynthSpec,
};
use netarch::stats::Correction;

#[derive(Parser)]
#[command(
    name = "netarch",
    version,
    about = "Embeds attributed movement networks, clusters them per week, and mines trajectory archetypes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage command; each overrides the config file.
#[derive(Args, Debug, Clone)]
struct CommonFlags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding week_<k>/edges.csv and week_<k>/attributes.csv.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Directory all stage outputs are written to.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Number of timesteps (weeks) to process.
    #[arg(long)]
    timesteps: Option<usize>,
    /// Global seed; all per-fit seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Cluster-count sweep, e.g. 2..6.
    #[arg(long, value_parser = parse_k_range)]
    k_range: Option<(usize, usize)>,
    /// kmeans, gmm, or both.
    #[arg(long)]
    method: Option<String>,
    /// Archetypes smaller than this are dropped.
    #[arg(long)]
    min_archetype_size: Option<usize>,
    /// Hamming threshold for the optional archetype fusion pass.
    #[arg(long)]
    fuse_threshold: Option<usize>,
    /// Significance level of the feature tests.
    #[arg(long)]
    alpha: Option<f64>,
    /// p-value correction: holm, bonferroni, or none.
    #[arg(long)]
    correction: Option<String>,
    /// Worker threads (0 = rayon default).
    #[arg(long)]
    threads: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    dimension: Option<usize>,
    /// Edge-penalty balance parameter of the solver.
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty parameter of the solver's consensus term.
    #[arg(long)]
    rho: Option<f64>,
    /// Pin the cluster count instead of the silhouette argmax.
    #[arg(long)]
    k: Option<usize>,
}

fn parse_k_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = if s.contains("..") {
        s.splitn(2, "..").collect()
    } else if s.contains(':') {
        s.splitn(2, ':').collect()
    } else {
        vec![s, s]
    };
    let lo = parts[0].trim().parse().map_err(|_| format!("bad k range `{s}`"))?;
    let hi = parts[1].trim().parse().map_err(|_| format!("bad k range `{s}`"))?;
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Command {
    /// Impute and standardize the weekly attribute tables.
    Features(CommonFlags),
    /// Solve the attributed network embedding per week.
    Embed(CommonFlags),
    /// Fit K-means and Gaussian mixtures over the K sweep.
    Cluster(CommonFlags),
    /// Silhouette table, stability comparison, and (K*, method*) selection.
    Validate(CommonFlags),
    /// Align labels across weeks and merge trajectories into archetypes.
    Archetype(CommonFlags),
    /// Kruskal-Wallis + Dunn post hoc feature difference scan.
    Test(CommonFlags),
    /// Run every stage end to end and write the manifest.
    Pipeline(CommonFlags),
    /// Generate a seeded planted-partition dataset.
    Synth(SynthFlags),
}

#[derive(Args, Debug)]
struct SynthFlags {
    /// Directory the dataset is written to.
    #[arg(long, default_value = "data")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 200)]
    nodes: usize,
    #[arg(long, default_value_t = 17)]
    timesteps: usize,
    #[arg(long, default_value_t = 0.3)]
    p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    p_out: f64,
    /// Block mean shift of the attributes, in noise standard deviations.
    #[arg(long, default_value_t = 3.0)]
    shift: f64,
    #[arg(long, default_value_t = 6)]
    features: usize,
    /// Week-to-week attribute noise relative to the persistent node noise.
    #[arg(long, default_value_t = 0.25)]
    jitter: f64,
    /// Tail nodes that change block mid-run (default: a tenth of the nodes).
    #[arg(long)]
    switchers: Option<usize>,
    /// Timestep of the block change (default: the midpoint).
    #[arg(long)]
    switch_at: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn resolve_config(flags: &CommonFlags) -> Result<PipelineConfig> {
    let mut cfg = match &flags.config {
        Some(path) => PipelineConfig::load_toml(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &flags.input_dir {
        cfg.input_dir = v.clone();
    }
    if let Some(v) = &flags.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = flags.timesteps {
        cfg.timesteps = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.k_range {
        cfg.k_range = v;
    }
    if let Some(v) = &flags.method {
        cfg.methods = match v.as_str() {
            "both" => vec![Method::KMeans, Method::Gmm],
            other => vec![other.parse()?],
        };
    }
    if let Some(v) = flags.min_archetype_size {
        cfg.min_archetype_size = v;
    }
    if let Some(v) = flags.fuse_threshold {
        cfg.fuse_threshold = v;
    }
    if let Some(v) = flags.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = &flags.correction {
        cfg.correction = v.parse::<Correction>()?;
    }
    if let Some(v) = flags.threads {
        cfg.threads = v;
    }
    if let Some(v) = flags.dimension {
        cfg.solver.dimension = v;
    }
    if let Some(v) = flags.lambda {
        cfg.solver.lambda = v;
    }
    if let Some(v) = flags.rho {
        cfg.solver.rho = v;
    }
    if let Some(v) = flags.k {
        cfg.k_override = Some(v);
    }
    cfg.validate()?;
    if cfg.threads > 0 {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features(f) => stage_features(&resolve_config(&f)?).map(|_| ()),
        Command::Embed(f) => stage_embed(&resolve_config(&f)?).map(|_| ()),
        Command::Cluster(f) => stage_cluster(&resolve_config(&f)?).map(|_| ()),
        Command::Validate(f) => stage_validate(&resolve_config(&f)?).map(|_| ()),
        Command::Archetype(f) => stage_archetype(&resolve_config(&f)?).map(|_| ()),
        Command::Test(f) => stage_stats(&resolve_config(&f)?).map(|_| ()),
        Command::Pipeline(f) => {
            let manifest = run_pipeline(&resolve_config(&f)?)?;
            println!(
                "pipeline complete: {} outputs, config {}",
                manifest.outputs.len(),
                &manifest.config_sha256[..12]
            );
            Ok(())
        }
        Command::Synth(f) => {
            let spec = SynthSpec {
                blocks: f.blocks,
                nodes: f.nodes,
                timesteps: f.timesteps,
                p_in: f.p_in,
                p_out: f.p_out,
                attribute_shift: f.shift,
                n_features: f.features,
                jitter: f.jitter,
                switchers: f.switchers,
                switch_at: f.switch_at,
                seed: f.seed,
            };
            let ds = generate_synthetic(&spec, &f.output_dir)?;
            println!(
                "synthetic dataset: {} nodes x {} weeks under {}",
                ds.node_ids.len(),
                ds.truth.len(),
                f.output_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
