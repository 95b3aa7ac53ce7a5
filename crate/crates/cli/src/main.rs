use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mapletag_cli::config::parse_kinds;
use mapletag_cli::{cmd_analyze, cmd_compare, cmd_evaluate, cmd_predict, cmd_train, exit_code, RunConfig, UsageError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mapletag",
    version,
    about = "Metadata-aware multi-label tagging of scientific papers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the training split and save it.
    Train {
        #[command(flatten)]
        opts: RunOpts,
        /// Model file to write; a `.manifest` file is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels for every paper of a dataset.
    Predict {
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        model: PathBuf,
        /// Prediction file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate over repeated runs, or evaluate a fixed model once.
    Evaluate {
        #[command(flatten)]
        opts: RunOpts,
        /// Evaluate this model instead of training.
        #[arg(long)]
        fixed_model: Option<PathBuf>,
        /// Report file; a `.manifest` file is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Test per-metric differences between two evaluation reports.
    Compare {
        /// Baseline report.
        report_a: PathBuf,
        /// Candidate report, tested against the baseline.
        report_b: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// welch, pooled or paired.
        #[arg(long)]
        ttest: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build per-field metadata effect vectors from evaluation reports.
    Analyze {
        /// Report files or directories of reports named
        /// `<field>__<combo>__<text|meta>`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Options shared by the commands that load a dataset. Flags override the
/// config file, which overrides built-in defaults.
#[derive(Args)]
struct RunOpts {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Papers, one JSON object per line.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label taxonomy, one JSON object per line; gold labels outside it are dropped.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// native or maple.
    #[arg(long)]
    schema: Option<String>,
    /// Metadata kind to add (venue, author, reference); repeatable, or a
    /// comma list. `none` selects text only.
    #[arg(long)]
    metadata: Vec<String>,
    /// Trees in the ensemble [default: 3].
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum labels per leaf [default: 100].
    #[arg(long)]
    max_leaf: Option<usize>,
    /// Beam width at prediction [default: 10].
    #[arg(long)]
    beam: Option<usize>,
    /// Minimum training document frequency of a feature [default: 5].
    #[arg(long)]
    min_df: Option<u32>,
    /// Base seed; run r and tree t use seed + r + t [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Train/evaluate cycles [default: 5].
    #[arg(long)]
    repetitions: Option<usize>,
    /// Cut-offs for P@k and nDCG (N@k), e.g. `1,3,5`.
    #[arg(long)]
    k: Option<String>,
    /// Taxonomy layers for layer-wise precision, e.g. `1,2`.
    #[arg(long)]
    layers: Option<String>,
    /// Boost labels whose names occur in the paper text.
    #[arg(long)]
    rerank: bool,
    /// Papers from this year on form the test split [default: 2016].
    #[arg(long)]
    test_start_year: Option<i32>,
    /// Share of pre-test papers held out for validation [default: 0.2].
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// Labels written per paper by `predict` [default: 5].
    #[arg(long)]
    top_k: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Significance level [default: 0.05].
    #[arg(long)]
    threshold: Option<f64>,
    /// welch, pooled or paired [default: welch].
    #[arg(long)]
    ttest: Option<String>,
}

impl RunOpts {
    fn resolve(&self) -> Result<RunConfig, UsageError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut set = |key: &str, value: Option<String>| match value {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let text = |v: &Option<String>| v.clone();
        set("dataset", path(&self.dataset))?;
        set("taxonomy", path(&self.taxonomy))?;
        set("schema", text(&self.schema))?;
        set("trees", self.trees.map(|v| v.to_string()))?;
        set("max_leaf", self.max_leaf.map(|v| v.to_string()))?;
        set("beam", self.beam.map(|v| v.to_string()))?;
        set("min_df", self.min_df.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("repetitions", self.repetitions.map(|v| v.to_string()))?;
        set("k", text(&self.k))?;
        set("layers", text(&self.layers))?;
        set("rerank", self.rerank.then(|| "true".to_string()))?;
        set("test_start_year", self.test_start_year.map(|v| v.to_string()))?;
        set("valid_fraction", self.valid_fraction.map(|v| v.to_string()))?;
        set("top_k", self.top_k.map(|v| v.to_string()))?;
        set("threads", self.threads.map(|v| v.to_string()))?;
        set("threshold", self.threshold.map(|v| v.to_string()))?;
        set("ttest", text(&self.ttest))?;
        if !self.metadata.is_empty() {
            let mut kinds = std::collections::BTreeSet::new();
            for m in &self.metadata {
                kinds.extend(parse_kinds(m)?);
            }
            cfg.metadata = kinds;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_threads(threads: usize) -> Result<()> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { opts, out } => {
            let cfg = opts.resolve()?;
            init_threads(cfg.threads)?;
            let s = cmd_train(&cfg, &out)?;
            eprintln!(
                "trained on {} papers, {} labels, {} features; model sha256 {}",
                s.train_papers, s.num_labels, s.feature_dimension, s.model_checksum
            );
        }
        Command::Predict { opts, model, out } => {
            let cfg = opts.resolve()?;
            init_threads(cfg.threads)?;
            let expected = (!opts.metadata.is_empty()).then_some(&cfg.metadata);
            cmd_predict(&cfg, &model, out.as_deref(), expected)?;
        }
        Command::Evaluate { opts, fixed_model, out } => {
            let cfg = opts.resolve()?;
            init_threads(cfg.threads)?;
            let report = cmd_evaluate(&cfg, fixed_model.as_deref(), &out)?;
            for (metric, value) in &report.per_metric {
                eprintln!("{metric}\t{value:.4}");
            }
        }
        Command::Compare {
            report_a,
            report_b,
            config,
            ttest,
            threshold,
            out,
        } => {
            let mut cfg = RunConfig::default();
            if let Some(path) = &config {
                cfg.apply_file(path)?;
            }
            if let Some(t) = ttest {
                cfg.set("ttest", &t)?;
            }
            if let Some(t) = threshold {
                cfg.set("threshold", &t.to_string())?;
            }
            cmd_compare(&report_a, &report_b, &cfg, out.as_deref())?;
        }
        Command::Analyze { reports, out } => {
            cmd_analyze(&reports, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
        Err(_) => ExitCode::from(1),
    }
}
