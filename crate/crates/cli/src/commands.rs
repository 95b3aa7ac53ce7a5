use crate::config::{RunConfig, RUN_INFO_PREFIX};
use crate::{OutputError, UsageError};
use anyhow::{Context, Result};
use log::{info, warn};
use mapletag::analysis::{effect_vector, export_vectors, EffectVector};
use mapletag::classifier::{lexical_rerank, load_model, save_model};
use mapletag::corpus::{build_feature_index, load_papers, load_taxonomy, restrict_to_taxonomy, split_by_year};
use mapletag::eval::{compare_reports, format_significance, EvalReport, MetricAccumulator, MetricSpec, RunMetrics};
use mapletag::{DatasetSplit, MetadataKind, Model64, Paper, Prediction64, Taxonomy};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Test papers predicted at once during evaluation; bounds memory for full
/// candidate rankings.
const EVAL_CHUNK: usize = 512;

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => mapletag::write_atomic(p, text.as_bytes()).map_err(|source| {
            OutputError {
                path: p.to_path_buf(),
                source,
            }
            .into()
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

struct Dataset {
    papers: Vec<Paper>,
    taxonomy: Option<Taxonomy>,
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| UsageError("a dataset is required (--dataset or `dataset =` in the config file)".into()))?;
    let start = Instant::now();
    let mut papers = load_papers(path, cfg.schema)?;
    let taxonomy = cfg.taxonomy.as_deref().map(load_taxonomy).transpose()?;
    if let Some(t) = &taxonomy {
        let emptied = restrict_to_taxonomy(&mut papers, t);
        if emptied > 0 {
            warn!("{emptied} papers have no label left after restricting to the taxonomy");
        }
    }
    info!(
        "loaded {} papers from {} in {:.2?}",
        papers.len(),
        path.display(),
        start.elapsed()
    );
    Ok(Dataset { papers, taxonomy })
}

fn train_split(cfg: &RunConfig, papers: &[Paper], seed: u64) -> Result<(Model64, DatasetSplit)> {
    let split = split_by_year(papers, cfg.test_start_year, cfg.valid_fraction, seed)?;
    info!(
        "seed {seed}: {} train / {} valid / {} test papers",
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    let start = Instant::now();
    let index = build_feature_index(&split.train, cfg.min_df, &cfg.metadata)?;
    info!(
        "feature index: {} words + {} metadata features ({:.2?})",
        index.num_words(),
        index.num_metadata(),
        start.elapsed()
    );
    let start = Instant::now();
    let model = Model64::fit(&split.train, index, &cfg.tree_config(seed), &cfg.train_params())?;
    info!("trained {} trees in {:.2?}", model.trees().len(), start.elapsed());
    Ok((model, split))
}

fn warn_if_combined(cfg: &RunConfig) {
    if cfg.metadata.len() > 1 {
        warn!("combining several metadata kinds is experimental; the reference protocol adds one kind at a time");
    }
}

/// Key facts of a trained model, also written to its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub model_checksum: String,
    pub feature_dimension: usize,
    pub num_words: usize,
    pub num_metadata: usize,
    pub num_labels: usize,
    pub train_papers: usize,
    pub valid_papers: usize,
    pub test_papers: usize,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains on the training split and writes the model to `out` and the
/// resolved configuration to `out.manifest`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    warn_if_combined(cfg);
    let data = load_dataset(cfg)?;
    let (model, split) = train_split(cfg, &data.papers, cfg.seed)?;
    let bytes = model.to_bytes();
    // The model file ends with the SHA-256 of its contents.
    let model_checksum = hex(&bytes[bytes.len() - 32..]);
    save_model(&model, out).map_err(|source| OutputError {
        path: out.to_path_buf(),
        source,
    })?;
    let index = model.feature_index();
    let summary = TrainSummary {
        model_checksum,
        feature_dimension: index.dimension(),
        num_words: index.num_words(),
        num_metadata: index.num_metadata(),
        num_labels: model.labels().len(),
        train_papers: split.train.len(),
        valid_papers: split.valid.len(),
        test_papers: split.test.len(),
    };

    let mut manifest = cfg.to_text();
    let mut put = |k: &str, v: String| writeln!(manifest, "{RUN_INFO_PREFIX}{k} = {v}").unwrap();
    put("command", "train".into());
    put("model", out.display().to_string());
    put("model_sha256", summary.model_checksum.clone());
    put("index_fingerprint", index.fingerprint());
    put(
        "tree_seeds",
        (0..cfg.trees as u64)
            .map(|t| cfg.seed.wrapping_add(t).to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    put("train_papers", summary.train_papers.to_string());
    put("valid_papers", summary.valid_papers.to_string());
    put("test_papers", summary.test_papers.to_string());
    put("labels", summary.num_labels.to_string());
    put("words", summary.num_words.to_string());
    for kind in MetadataKind::ALL {
        put(&format!("{kind}_features"), index.metadata_count(kind).to_string());
    }
    put("feature_dimension", summary.feature_dimension.to_string());
    write_output(Some(&manifest_path(out)), &manifest)?;
    info!("wrote {} ({})", out.display(), summary.model_checksum);
    Ok(summary)
}

fn kinds_text(kinds: &BTreeSet<MetadataKind>) -> String {
    if kinds.is_empty() {
        "none".into()
    } else {
        kinds.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn rerank_all(predictions: &mut [Prediction64], papers: &[Paper], taxonomy: &Taxonomy) {
    for (p, paper) in predictions.iter_mut().zip(papers) {
        *p = lexical_rerank(p, paper, taxonomy);
    }
}

/// Writes one prediction line per paper of the configured dataset.
///
/// With `expected_kinds`, the model's metadata kinds must match. With
/// re-ranking on, every label reached by the beam is re-ranked before the
/// list is cut to `top_k`.
pub fn cmd_predict(
    cfg: &RunConfig,
    model_path: &Path,
    out: Option<&Path>,
    expected_kinds: Option<&BTreeSet<MetadataKind>>,
) -> Result<usize> {
    cfg.validate()?;
    let model: Model64 = load_model(model_path)?;
    let index = model.feature_index();
    if let Some(kinds) = expected_kinds {
        if kinds != index.kinds() {
            return Err(mapletag::Error::FeatureIndexMismatch {
                expected: format!(
                    "model index {} over metadata {}",
                    index.fingerprint(),
                    kinds_text(index.kinds())
                ),
                found: format!("requested metadata {}", kinds_text(kinds)),
            }
            .into());
        }
    }
    let data = load_dataset(cfg)?;
    let taxonomy = match (cfg.rerank, &data.taxonomy) {
        (true, None) => return Err(UsageError("--rerank needs a taxonomy for label names".into()).into()),
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };
    let start = Instant::now();
    let depth = if taxonomy.is_some() { usize::MAX } else { cfg.top_k };
    let mut predictions = model.predict_all(&data.papers, cfg.beam, depth);
    if let Some(t) = taxonomy {
        rerank_all(&mut predictions, &data.papers, t);
        for p in &mut predictions {
            p.ranked.truncate(cfg.top_k);
        }
    }
    let mut text = String::new();
    for p in &predictions {
        text.push_str(&p.to_line());
        text.push('\n');
    }
    write_output(out, &text)?;
    info!("predicted {} papers in {:.2?}", predictions.len(), start.elapsed());
    Ok(predictions.len())
}

fn evaluate_model(
    cfg: &RunConfig,
    model: &Model64,
    test: &[Paper],
    taxonomy: Option<&Taxonomy>,
    layers: &[u32],
) -> Result<RunMetrics> {
    let spec = MetricSpec {
        ks: &cfg.k,
        layers: taxonomy.map(|t| (t, layers)),
    };
    let rerank = if cfg.rerank { taxonomy } else { None };
    let mut acc = MetricAccumulator::new(spec)?;
    for chunk in test.chunks(EVAL_CHUNK) {
        let mut predictions = model.predict_all(chunk, cfg.beam, usize::MAX);
        if let Some(t) = rerank {
            rerank_all(&mut predictions, chunk, t);
        }
        for (p, paper) in predictions.iter().zip(chunk) {
            let ranked: Vec<&str> = p.labels().collect();
            acc.push(spec.score(&ranked, &paper.labels)?);
        }
    }
    Ok(acc.finish())
}

/// Runs `cfg.repetitions` train + evaluate cycles with seeds `seed`,
/// `seed + 1`, ..., or evaluates `fixed_model` once, and writes the report
/// to `out` with the resolved configuration in `out.manifest`.
pub fn cmd_evaluate(cfg: &RunConfig, fixed_model: Option<&Path>, out: &Path) -> Result<EvalReport> {
    cfg.validate()?;
    warn_if_combined(cfg);
    let data = load_dataset(cfg)?;
    if cfg.rerank && data.taxonomy.is_none() {
        return Err(UsageError("--rerank needs a taxonomy for label names".into()).into());
    }
    let layers = match &data.taxonomy {
        Some(t) if cfg.layers.is_empty() => t.layers(),
        _ => cfg.layers.clone(),
    };
    let taxonomy = data.taxonomy.as_ref();
    let mut runs = Vec::new();
    let mut seeds = Vec::new();
    match fixed_model {
        Some(path) => {
            let model: Model64 = load_model(path)?;
            let split = split_by_year(&data.papers, cfg.test_start_year, cfg.valid_fraction, cfg.seed)?;
            if cfg.repetitions > 1 {
                info!(
                    "fixed model: evaluating once instead of {} repetitions",
                    cfg.repetitions
                );
            }
            runs.push(evaluate_model(cfg, &model, &split.test, taxonomy, &layers)?);
            seeds.push(cfg.seed);
        }
        None => {
            for r in 0..cfg.repetitions {
                let seed = cfg.seed.wrapping_add(r as u64);
                info!("run {r}: seed {seed}");
                let (model, split) = train_split(cfg, &data.papers, seed)?;
                let start = Instant::now();
                runs.push(evaluate_model(cfg, &model, &split.test, taxonomy, &layers)?);
                info!(
                    "run {r}: evaluated {} test papers in {:.2?}",
                    split.test.len(),
                    start.elapsed()
                );
                seeds.push(seed);
            }
        }
    }
    let report = EvalReport::from_runs(runs)?;
    write_output(Some(out), &report.to_text())?;

    let mut manifest = cfg.to_text();
    let mut put = |k: &str, v: String| writeln!(manifest, "{RUN_INFO_PREFIX}{k} = {v}").unwrap();
    put("command", "evaluate".into());
    put("report", out.display().to_string());
    if let Some(p) = fixed_model {
        put("fixed_model", p.display().to_string());
    }
    put("seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    put(
        "evaluated_layers",
        layers.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
    );
    write_output(Some(&manifest_path(out)), &manifest)?;
    Ok(report)
}

/// Tests every metric with per-run values in both reports, `b` against
/// baseline `a`.
pub fn cmd_compare(
    report_a: &Path,
    report_b: &Path,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<Vec<mapletag::eval::SignificanceResult>> {
    cfg.validate()?;
    let a = EvalReport::load(report_a)?;
    let b = EvalReport::load(report_b)?;
    let results = compare_reports(&a, &b, cfg.ttest, cfg.threshold)
        .with_context(|| format!("comparing {} with {}", report_b.display(), report_a.display()))?;
    write_output(out, &format_significance(&results))?;
    Ok(results)
}

/// Condition of a report in the `<field>__<combo>__<condition>` naming scheme.
const TEXT: &str = "text";
const META: &str = "meta";

fn report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| mapletag::Error::Io {
                path: input.clone(),
                source: e,
            })?;
            for entry in entries {
                let path = entry.map_err(|e| mapletag::Error::Io {
                    path: input.clone(),
                    source: e,
                })?;
                let path = path.path();
                if path.is_file() && !path.to_string_lossy().ends_with(".manifest") {
                    files.push(path);
                }
            }
        } else {
            files.push(input.clone());
        }
    }
    files.sort();
    Ok(files)
}

/// Builds one effect vector per field from reports named
/// `<field>__<classifier>+<metadata>__<text|meta>.<ext>` and writes them as CSV.
///
/// A combination's text-only report may also be shared per classifier as
/// `<field>__<classifier>__text`.
pub fn cmd_analyze(inputs: &[PathBuf], out: &Path) -> Result<Vec<EffectVector>> {
    // field -> (tag -> (condition -> path))
    let mut by_field: BTreeMap<String, BTreeMap<String, BTreeMap<String, PathBuf>>> = BTreeMap::new();
    for path in report_files(inputs)? {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parts: Vec<&str> = stem.split("__").collect();
        let [field, tag, condition] = parts[..] else {
            return Err(UsageError(format!(
                "report {} is not named <field>__<combo>__<condition>",
                path.display()
            ))
            .into());
        };
        if condition != TEXT && condition != META {
            return Err(UsageError(format!(
                "report {}: condition must be {TEXT:?} or {META:?}, found {condition:?}",
                path.display()
            ))
            .into());
        }
        by_field
            .entry(field.into())
            .or_default()
            .entry(tag.into())
            .or_default()
            .insert(condition.into(), path);
    }

    let mut missing = Vec::new();
    let mut vectors = Vec::new();
    for (field, tags) in &by_field {
        let mut pairs = BTreeMap::new();
        for (tag, conds) in tags {
            let shared_text = tag
                .split_once('+')
                .and_then(|(classifier, _)| tags.get(classifier)?.get(TEXT));
            match (conds.get(META), conds.get(TEXT).or(shared_text)) {
                (Some(meta), Some(text)) => {
                    pairs.insert(tag.clone(), (EvalReport::load(text)?, EvalReport::load(meta)?));
                }
                (Some(_), None) => missing.push(format!("{field}__{tag}__{TEXT}")),
                // A text-only report without '+' may serve as a shared baseline.
                (None, Some(_)) if !tag.contains('+') => {}
                (None, _) => missing.push(format!("{field}__{tag}__{META}")),
            }
        }
        if missing.is_empty() {
            vectors.push(effect_vector(field, &pairs)?);
        }
    }
    if !missing.is_empty() {
        return Err(UsageError(format!("incomplete report pairs; missing: {}", missing.join(", "))).into());
    }
    export_vectors(&vectors, out).map_err(|source| match source {
        mapletag::Error::Io { .. } => anyhow::Error::from(OutputError {
            path: out.to_path_buf(),
            source,
        }),
        other => other.into(),
    })?;
    info!("wrote {} effect vectors to {}", vectors.len(), out.display());
    Ok(vectors)
}
