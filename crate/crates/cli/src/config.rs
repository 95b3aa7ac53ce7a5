//! Run configuration: built-in defaults, overridden by a `key = value` file,
//! overridden by command-line flags.

use crate::UsageError;
use mapletag::classifier::SolverParams;
use mapletag::corpus::DatasetSchema;
use mapletag::eval::TTestKind;
use mapletag::{FeatureConfig, MetadataKind, TrainParams, TreeConfig};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Prefix of informational manifest keys, skipped when a manifest is read
/// back as a config file.
pub const RUN_INFO_PREFIX: &str = "run.";

/// Everything a command needs besides its input and output paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub schema: DatasetSchema,
    pub metadata: BTreeSet<MetadataKind>,
    pub test_start_year: i32,
    pub valid_fraction: f64,
    pub min_df: u32,
    pub trees: usize,
    pub max_leaf: usize,
    pub kmeans_iters: usize,
    pub kmeans_tolerance: f64,
    pub beam: usize,
    pub reg_c: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub weight_threshold: f64,
    pub normalize: bool,
    pub text_weight: f64,
    pub metadata_weight: f64,
    pub rerank: bool,
    pub repetitions: usize,
    pub k: Vec<usize>,
    pub top_k: usize,
    /// Taxonomy layers for layer-restricted precision; empty means every
    /// layer present in the taxonomy.
    pub layers: Vec<u32>,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub threads: usize,
    pub ttest: TTestKind,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tree = TreeConfig::default();
        let solver = SolverParams::default();
        let features = FeatureConfig::default();
        RunConfig {
            dataset: None,
            taxonomy: None,
            schema: DatasetSchema::Native,
            metadata: BTreeSet::new(),
            test_start_year: 2016,
            valid_fraction: 0.2,
            min_df: 5,
            trees: tree.num_trees,
            max_leaf: tree.max_leaf_labels,
            kmeans_iters: tree.max_kmeans_iters,
            kmeans_tolerance: tree.kmeans_tolerance,
            beam: 10,
            reg_c: solver.reg_c,
            tolerance: solver.tol,
            max_iters: solver.max_iters,
            weight_threshold: solver.weight_threshold,
            normalize: features.normalize,
            text_weight: features.text_weight,
            metadata_weight: features.metadata_weight,
            rerank: false,
            repetitions: 5,
            k: vec![1, 3, 5],
            top_k: 5,
            layers: Vec::new(),
            seed: 0,
            threads: 0,
            ttest: TTestKind::Welch,
            threshold: mapletag::eval::DEFAULT_THRESHOLD,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value
        .parse()
        .map_err(|_| UsageError(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, UsageError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(UsageError(format!(
            "invalid value {value:?} for {key}: expected true or false"
        ))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, UsageError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Metadata kinds from a comma list; empty or `none` selects text only.
pub fn parse_kinds(value: &str) -> Result<BTreeSet<MetadataKind>, UsageError> {
    if value.trim().eq_ignore_ascii_case("none") {
        return Ok(BTreeSet::new());
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e: mapletag::Error| UsageError(e.to_string())))
        .collect()
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn ttest_name(kind: TTestKind) -> &'static str {
    match kind {
        TTestKind::Welch => "welch",
        TTestKind::Pooled => "pooled",
        TTestKind::Paired => "paired",
    }
}

impl RunConfig {
    /// Sets one option by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "taxonomy" => self.taxonomy = Some(PathBuf::from(v)),
            "schema" => self.schema = v.parse().map_err(|e: mapletag::Error| UsageError(e.to_string()))?,
            "metadata" => self.metadata = parse_kinds(v)?,
            "test_start_year" => self.test_start_year = parse(key, v)?,
            "valid_fraction" => self.valid_fraction = parse(key, v)?,
            "min_df" => self.min_df = parse(key, v)?,
            "trees" => self.trees = parse(key, v)?,
            "max_leaf" => self.max_leaf = parse(key, v)?,
            "kmeans_iters" => self.kmeans_iters = parse(key, v)?,
            "kmeans_tolerance" => self.kmeans_tolerance = parse(key, v)?,
            "beam" => self.beam = parse(key, v)?,
            "reg_c" => self.reg_c = parse(key, v)?,
            "tolerance" => self.tolerance = parse(key, v)?,
            "max_iters" => self.max_iters = parse(key, v)?,
            "weight_threshold" => self.weight_threshold = parse(key, v)?,
            "normalize" => self.normalize = parse_bool(key, v)?,
            "text_weight" => self.text_weight = parse(key, v)?,
            "metadata_weight" => self.metadata_weight = parse(key, v)?,
            "rerank" => self.rerank = parse_bool(key, v)?,
            "repetitions" => self.repetitions = parse(key, v)?,
            "k" => self.k = parse_list(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "layers" => self.layers = parse_list(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "ttest" => self.ttest = v.parse().map_err(|e: mapletag::Error| UsageError(e.to_string()))?,
            "threshold" => self.threshold = parse(key, v)?,
            _ => return Err(UsageError(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`. Blank lines, `#`
    /// comments and informational `run.*` keys are skipped.
    pub fn apply_file_text(&mut self, text: &str, path: &Path) -> Result<(), UsageError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(UsageError(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    n + 1
                )));
            };
            let key = key.trim();
            if key.starts_with(RUN_INFO_PREFIX) {
                continue;
            }
            self.set(key, value)
                .map_err(|e| UsageError(format!("{}:{}: {}", path.display(), n + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config file {}: {e}", path.display())))?;
        self.apply_file_text(&text, path)
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let fail = |msg: &str| Err(UsageError(msg.to_string()));
        if self.repetitions < 1 {
            return fail("repetitions must be at least 1");
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return fail("k values must be positive");
        }
        if self.k.iter().collect::<BTreeSet<_>>().len() != self.k.len() {
            return fail("k values must be distinct");
        }
        if self.trees < 1 {
            return fail("trees must be at least 1");
        }
        if self.max_leaf < 2 {
            return fail("max_leaf must be at least 2");
        }
        if self.kmeans_iters < 1 {
            return fail("kmeans_iters must be at least 1");
        }
        if self.beam < 1 {
            return fail("beam must be at least 1");
        }
        if self.top_k < 1 {
            return fail("top_k must be at least 1");
        }
        if self.min_df < 1 {
            return fail("min_df must be at least 1");
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return fail("valid_fraction must lie in [0, 1)");
        }
        if !(self.reg_c > 0.0 && self.tolerance > 0.0 && self.weight_threshold >= 0.0) {
            return fail("reg_c and tolerance must be positive and weight_threshold non-negative");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn tree_config(&self, seed: u64) -> TreeConfig {
        TreeConfig {
            num_trees: self.trees,
            max_leaf_labels: self.max_leaf,
            seed,
            max_kmeans_iters: self.kmeans_iters,
            kmeans_tolerance: self.kmeans_tolerance,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            solver: SolverParams {
                reg_c: self.reg_c,
                tol: self.tolerance,
                max_iters: self.max_iters,
                weight_threshold: self.weight_threshold,
            },
            features: FeatureConfig {
                normalize: self.normalize,
                text_weight: self.text_weight,
                metadata_weight: self.metadata_weight,
            },
        }
    }

    /// Every option as `key = value`, in a form [`Self::apply_file_text`]
    /// reads back to an equal configuration.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        if let Some(p) = path(&self.dataset) {
            put("dataset", p);
        }
        if let Some(p) = path(&self.taxonomy) {
            put("taxonomy", p);
        }
        put("schema", self.schema.to_string());
        put(
            "metadata",
            if self.metadata.is_empty() {
                "none".into()
            } else {
                join(&self.metadata)
            },
        );
        put("test_start_year", self.test_start_year.to_string());
        put("valid_fraction", self.valid_fraction.to_string());
        put("min_df", self.min_df.to_string());
        put("trees", self.trees.to_string());
        put("max_leaf", self.max_leaf.to_string());
        put("kmeans_iters", self.kmeans_iters.to_string());
        put("kmeans_tolerance", self.kmeans_tolerance.to_string());
        put("beam", self.beam.to_string());
        put("reg_c", self.reg_c.to_string());
        put("tolerance", self.tolerance.to_string());
        put("max_iters", self.max_iters.to_string());
        put("weight_threshold", self.weight_threshold.to_string());
        put("normalize", self.normalize.to_string());
        put("text_weight", self.text_weight.to_string());
        put("metadata_weight", self.metadata_weight.to_string());
        put("rerank", self.rerank.to_string());
        put("repetitions", self.repetitions.to_string());
        put("k", join(&self.k));
        put("top_k", self.top_k.to_string());
        put("layers", join(&self.layers));
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        put("ttest", ttest_name(self.ttest).into());
        put("threshold", self.threshold.to_string());
        s
    }
}
