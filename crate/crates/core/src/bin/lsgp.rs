use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsgp::data::SyntheticSpec;
use lsgp::experiment::{
    generate_to_dir, run_experiment, run_graph, run_groups, score_files, threads_from_env, DataSource,
    ExperimentConfig, GroupsOptions, Method,
};
use lsgp::Error;

/// Sparse variational latent-similarity GP experiments.
///
/// Worker threads are read from LSGP_THREADS (default 1).
#[derive(Parser)]
#[command(name = "lsgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort and its ground-truth clusters.
    Generate(GenerateArgs),
    /// Fit and evaluate every configured method over all cuts.
    Run(RunArgs),
    /// Fit baselines on random or labeled groups of subjects.
    Groups(GroupsArgs),
    /// Export the subject-similarity graph of a fitted SV-LSGP.
    Graph(GraphArgs),
    /// Score a probabilities CSV against a labels CSV.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 40)]
    subjects: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    obs_min: usize,
    #[arg(long, default_value_t = 240)]
    obs_max: usize,
    #[arg(long, default_value_t = 6)]
    features: usize,
    #[arg(long, default_value_t = 0.2)]
    base_rate: f64,
    #[arg(long, default_value_t = 2)]
    latent_dim: usize,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cohort CSV instead of the synthetic generator.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cuts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> lsgp::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.data {
            cfg.data = DataSource::Csv(p.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.cuts {
            cfg.n_cuts = c;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated subset of lr, knn, svlsgp.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    inducing: Option<usize>,
    /// Report KNN log-likelihood from smoothed votes.
    #[arg(long)]
    knn_ll: bool,
}

#[derive(Args)]
struct GroupsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "lr")]
    method: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    g: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// subject_id,label CSV for labeled grouping.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    cut: usize,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// subject_id,group CSV.
    #[arg(long)]
    groups: PathBuf,
    /// Minimum covariance kept; defaults to the 75th percentile.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Output path without extension; .dot and .json are written.
    #[arg(long, default_value = "graph")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV with a `prob` column.
    #[arg(long)]
    probs: PathBuf,
    /// CSV with a `label` column.
    #[arg(long)]
    labels: PathBuf,
    /// subject_id,count CSV of training sizes for the strata.
    #[arg(long)]
    train_counts: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> lsgp::Result<Method> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| Error::Config(format!("unknown method `{s}` (expected lr, knn or svlsgp)")))
}

fn execute(cli: Cli) -> lsgp::Result<()> {
    let threads = threads_from_env()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    match cli.command {
        Command::Generate(a) => {
            let spec = SyntheticSpec {
                n_subjects: a.subjects,
                n_clusters: a.clusters,
                obs_per_subject: (a.obs_min, a.obs_max),
                feature_dim: a.features,
                base_rate: a.base_rate,
                latent_dim_true: a.latent_dim,
                seed: a.seed,
                ..SyntheticSpec::default()
            };
            let g = generate_to_dir(&spec, &a.out)?;
            println!(
                "subjects {}  observations {}  positive rate {:.4}  -> {}",
                g.cohort.n_subjects(),
                g.cohort.len(),
                g.cohort.positive_rate(),
                a.out.display()
            );
        }
        Command::Run(a) => {
            let mut cfg = a.common.resolve()?;
            if let Some(ms) = &a.methods {
                cfg.methods = ms.iter().map(|m| parse_method(m)).collect::<lsgp::Result<_>>()?;
            }
            if let Some(r) = a.restarts {
                cfg.n_restarts = r;
            }
            if let Some(s) = a.steps {
                cfg.lsgp.n_steps = s;
            }
            if let Some(m) = a.inducing {
                cfg.lsgp.n_inducing = m;
            }
            cfg.knn_log_likelihood |= a.knn_ll;
            let outcome = run_experiment(&cfg, threads)?;
            print!("{}", std::fs::read_to_string(cfg.output_dir.join("results.csv"))?);
            let failed = outcome.manifest.failed();
            if failed > 0 {
                return Err(Error::Numerical(format!(
                    "{failed} stage(s) failed; see {}",
                    cfg.output_dir.join("manifest.json").display()
                )));
            }
        }
        Command::Groups(a) => {
            let cfg = a.common.resolve()?;
            let options = GroupsOptions {
                method: parse_method(&a.method)?,
                g_list: a.g,
                repeats: a.repeats,
                labels: a.labels,
                cut: a.cut,
            };
            let result = run_groups(&cfg, &options)?;
            for (g, m) in result.medians("auc") {
                println!("G = {g:>3}  median auc {m:.4}");
            }
        }
        Command::Graph(a) => {
            let export = run_graph(&a.checkpoint, &a.groups, a.threshold, a.gamma, &a.out)?;
            let show = |q: Option<f64>| q.map_or("undefined".to_string(), |v| v.to_string());
            println!("Q_paper {}", show(export.q_paper));
            println!("Q_standard {}", show(export.q_standard));
            println!("edges {}  nodes {}", export.edges.len(), export.nodes.len());
        }
        Command::Metrics(a) => {
            let report = score_files(&a.probs, &a.labels, a.train_counts.as_deref())?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            match a.out {
                Some(p) => std::fs::write(p, json)?,
                None => print!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
