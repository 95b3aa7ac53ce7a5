//! Ranking metrics, report files and significance tests.
//!
//! Metric names used in reports: `P@k` (precision), `N@k` (NDCG) and
//! `L{j}P@k` (precision restricted to taxonomy layer `j`).

use crate::classifier::Prediction;
use crate::corpus::{Paper, Taxonomy};
use crate::error::{Error, Result};
use crate::scalar::Real;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

/// Default significance level.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

fn check_inputs(gold: &BTreeSet<String>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    Ok(())
}

/// Fraction of the first `k` ranked labels that are gold. Slots past the end
/// of a short ranking count as misses.
pub fn precision_at_k<S: AsRef<str>>(ranked: &[S], gold: &BTreeSet<String>, k: usize) -> Result<f64> {
    check_inputs(gold, k)?;
    let hits = ranked.iter().take(k).filter(|l| gold.contains(l.as_ref())).count();
    Ok(hits as f64 / k as f64)
}

/// NDCG with binary gains and `log2(i + 1)` discounts, normalized by the ideal
/// DCG over `min(k, |gold|)` positions.
pub fn ndcg_at_k<S: AsRef<str>>(ranked: &[S], gold: &BTreeSet<String>, k: usize) -> Result<f64> {
    check_inputs(gold, k)?;
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, l)| gold.contains(l.as_ref()))
        .map(|(i, _)| discount(i))
        .sum();
    let ideal: f64 = (0..k.min(gold.len())).map(discount).sum();
    Ok(dcg / ideal)
}

/// P@k with both the ranking and the gold set restricted to labels of `layer`.
///
/// Returns `None` when no gold label lies in the layer; such papers are left
/// out of that layer's aggregate.
pub fn layer_precision_at_k<S: AsRef<str>>(
    ranked: &[S],
    gold: &BTreeSet<String>,
    taxonomy: &Taxonomy,
    layer: u32,
    k: usize,
) -> Result<Option<f64>> {
    check_inputs(gold, k)?;
    let layer_of = |l: &str| taxonomy.layer(l).ok_or_else(|| Error::UnknownLayer(l.to_string()));
    let mut layer_gold = BTreeSet::new();
    for g in gold {
        if layer_of(g)? == layer {
            layer_gold.insert(g.clone());
        }
    }
    let mut layer_ranked = Vec::new();
    for l in ranked {
        if layer_of(l.as_ref())? == layer {
            layer_ranked.push(l.as_ref());
        }
    }
    if layer_gold.is_empty() {
        return Ok(None);
    }
    precision_at_k(&layer_ranked, &layer_gold, k).map(Some)
}

/// Arithmetic mean, summed in input order.
pub fn aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    Ok(values.iter().fold(0.0, |acc, v| acc + v) / values.len() as f64)
}

/// Unweighted mean of per-dataset scores.
pub fn macro_average(per_dataset: &[f64]) -> Result<f64> {
    aggregate(per_dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    Absolute,
    Relative,
}

/// Change from `without` to `with`, absolute or relative to `without`.
pub fn delta(with: f64, without: f64, mode: DeltaMode) -> Result<f64> {
    match mode {
        DeltaMode::Absolute => Ok(with - without),
        DeltaMode::Relative if without == 0.0 => Err(Error::ZeroBaseline),
        DeltaMode::Relative => Ok((with - without) / without),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Equal variances, pooled estimate.
    Pooled,
    /// Paired samples of equal length.
    Paired,
}

impl FromStr for TTestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "welch" => Ok(TTestKind::Welch),
            "pooled" | "student" => Ok(TTestKind::Pooled),
            "paired" => Ok(TTestKind::Paired),
            _ => Err(Error::InvalidInput(format!("unknown t-test kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Better,
    Worse,
    Indistinguishable,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Better => "better",
            Direction::Worse => "worse",
            Direction::Indistinguishable => "indistinguishable",
        })
    }
}

/// Outcome of comparing sample `b` against baseline sample `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceResult {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Statistic for `mean(b) - mean(a)`.
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub direction: Direction,
    pub threshold: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-tailed Welch t-test of `b` against `a`; see [`t_test`].
pub fn two_tailed_t_test(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    t_test(a, b, TTestKind::Welch, DEFAULT_THRESHOLD)
}

/// Two-tailed t-test of `b` against `a`.
///
/// `Better` means `mean(b) > mean(a)` with `p < threshold`, `Worse` the
/// reverse. When both samples have zero variance the statistic is 0 (equal
/// means, p = 1) or infinite (p = 0).
pub fn t_test(a: &[f64], b: &[f64], kind: TTestKind, threshold: f64) -> Result<SignificanceResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("each sample needs at least 2 values".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside (0, 1)")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let diff = mean_b - mean_a;
    let (se2, df) = match kind {
        TTestKind::Welch => {
            let (sa, sb) = (var_a / na, var_b / nb);
            let se2 = sa + sb;
            let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            (se2, df)
        }
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / df;
            (pooled * (1.0 / na + 1.0 / nb), df)
        }
        TTestKind::Paired => {
            if a.len() != b.len() {
                return Err(Error::InvalidInput("paired samples must have equal length".into()));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
            let (_, var_d) = mean_var(&d);
            (var_d / na, na - 1.0)
        }
    };
    let (t, p_value) = if se2 == 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(diff), 0.0)
        }
    } else {
        let t = diff / se2.sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    let direction = if p_value < threshold && diff > 0.0 {
        Direction::Better
    } else if p_value < threshold && diff < 0.0 {
        Direction::Worse
    } else {
        Direction::Indistinguishable
    };
    Ok(SignificanceResult {
        metric: String::new(),
        mean_a,
        mean_b,
        t,
        df,
        p_value,
        direction,
        threshold,
    })
}

/// Metric values of one evaluation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub metrics: BTreeMap<String, f64>,
    /// Papers with at least one gold label.
    pub n_test_papers: usize,
    /// Papers skipped for having no gold labels.
    pub n_excluded: usize,
}

/// Which metrics to compute.
#[derive(Debug, Clone, Copy)]
pub struct MetricSpec<'a> {
    pub ks: &'a [usize],
    /// Taxonomy and layers for layer-restricted precision.
    pub layers: Option<(&'a Taxonomy, &'a [u32])>,
}

pub fn precision_name(k: usize) -> String {
    format!("P@{k}")
}

pub fn ndcg_name(k: usize) -> String {
    format!("N@{k}")
}

pub fn layer_precision_name(layer: u32, k: usize) -> String {
    format!("L{layer}P@{k}")
}

/// Metric values of a single paper, in [`MetricSpec`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperScores {
    /// `P@k` then `N@k` for each `k`.
    plain: Vec<f64>,
    /// Layer precision per (layer, k); `None` when the paper has no gold
    /// label in the layer.
    layered: Vec<Option<f64>>,
}

impl<'a> MetricSpec<'a> {
    fn layers(&self) -> &'a [u32] {
        self.layers.map_or(&[], |(_, l)| l)
    }

    fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidInput("k values must be positive and nonempty".into()));
        }
        Ok(())
    }

    /// Scores one paper; `None` when its gold set is empty.
    pub fn score<S: AsRef<str>>(&self, ranked: &[S], gold: &BTreeSet<String>) -> Result<Option<PaperScores>> {
        if gold.is_empty() {
            return Ok(None);
        }
        let mut plain = Vec::with_capacity(2 * self.ks.len());
        for &k in self.ks {
            plain.push(precision_at_k(ranked, gold, k)?);
            plain.push(ndcg_at_k(ranked, gold, k)?);
        }
        let mut layered = Vec::with_capacity(self.layers().len() * self.ks.len());
        if let Some((taxonomy, layers)) = self.layers {
            for &j in layers {
                for &k in self.ks {
                    layered.push(layer_precision_at_k(ranked, gold, taxonomy, j, k)?);
                }
            }
        }
        Ok(Some(PaperScores { plain, layered }))
    }
}

/// Running sums of per-paper scores, added in a fixed order so the means do
/// not depend on how the scores were computed.
#[derive(Debug, Clone)]
pub struct MetricAccumulator<'a> {
    spec: MetricSpec<'a>,
    plain: Vec<f64>,
    layered: Vec<(f64, usize)>,
    n_test: usize,
    n_excluded: usize,
}

impl<'a> MetricAccumulator<'a> {
    pub fn new(spec: MetricSpec<'a>) -> Result<Self> {
        spec.validate()?;
        Ok(MetricAccumulator {
            spec,
            plain: vec![0.0; 2 * spec.ks.len()],
            layered: vec![(0.0, 0); spec.layers().len() * spec.ks.len()],
            n_test: 0,
            n_excluded: 0,
        })
    }

    pub fn push(&mut self, scores: Option<PaperScores>) {
        let Some(scores) = scores else {
            self.n_excluded += 1;
            return;
        };
        self.n_test += 1;
        for (sum, v) in self.plain.iter_mut().zip(&scores.plain) {
            *sum += v;
        }
        for (acc, v) in self.layered.iter_mut().zip(&scores.layered) {
            if let Some(v) = v {
                acc.0 += v;
                acc.1 += 1;
            }
        }
    }

    /// Means over the scored papers. A layer metric is omitted when no paper
    /// has a gold label in that layer.
    pub fn finish(self) -> RunMetrics {
        let mut metrics = BTreeMap::new();
        if self.n_test > 0 {
            let n = self.n_test as f64;
            for (c, &k) in self.spec.ks.iter().enumerate() {
                metrics.insert(precision_name(k), self.plain[2 * c] / n);
                metrics.insert(ndcg_name(k), self.plain[2 * c + 1] / n);
            }
            for (li, &j) in self.spec.layers().iter().enumerate() {
                for (c, &k) in self.spec.ks.iter().enumerate() {
                    let (sum, count) = self.layered[li * self.spec.ks.len() + c];
                    if count > 0 {
                        metrics.insert(layer_precision_name(j, k), sum / count as f64);
                    }
                }
            }
        }
        RunMetrics {
            metrics,
            n_test_papers: self.n_test,
            n_excluded: self.n_excluded,
        }
    }
}

/// Scores rankings against gold label sets, one pair per paper.
///
/// Papers with empty gold sets are excluded and counted. A layer metric is
/// omitted when no paper has a gold label in that layer.
pub fn evaluate_rankings<S: AsRef<str> + Sync>(
    rankings: &[Vec<S>],
    gold: &[&BTreeSet<String>],
    spec: MetricSpec<'_>,
) -> Result<RunMetrics> {
    if rankings.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "{} rankings for {} gold sets",
            rankings.len(),
            gold.len()
        )));
    }
    let mut acc = MetricAccumulator::new(spec)?;
    let scores: Vec<Option<PaperScores>> = rankings
        .par_iter()
        .zip(gold.par_iter())
        .map(|(r, g)| spec.score(r, g))
        .collect::<Result<_>>()?;
    for s in scores {
        acc.push(s);
    }
    Ok(acc.finish())
}

/// [`evaluate_rankings`] for predictions aligned with the papers they score.
pub fn evaluate_predictions<F: Real>(
    predictions: &[Prediction<F>],
    papers: &[Paper],
    spec: MetricSpec<'_>,
) -> Result<RunMetrics> {
    if predictions.len() != papers.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} papers",
            predictions.len(),
            papers.len()
        )));
    }
    if let Some((p, q)) = predictions.iter().zip(papers).find(|(p, q)| p.paper_id != q.id) {
        return Err(Error::InvalidInput(format!(
            "prediction for {:?} is aligned with paper {:?}",
            p.paper_id, q.id
        )));
    }
    let rankings: Vec<Vec<&str>> = predictions.iter().map(|p| p.labels().collect()).collect();
    let gold: Vec<&BTreeSet<String>> = papers.iter().map(|p| &p.labels).collect();
    evaluate_rankings(&rankings, &gold, spec)
}

/// Mean metrics over repeated runs, with the runs kept for significance tests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub per_metric: BTreeMap<String, f64>,
    pub runs: Vec<BTreeMap<String, f64>>,
    pub n_test_papers: usize,
    pub n_excluded: usize,
}

impl EvalReport {
    /// Averages runs that all report the same metrics on the same test set.
    pub fn from_runs(runs: Vec<RunMetrics>) -> Result<Self> {
        let first = runs.first().ok_or(Error::EmptyAggregate)?;
        for (i, r) in runs.iter().enumerate() {
            if r.metrics.keys().ne(first.metrics.keys()) {
                return Err(Error::InvalidInput(format!(
                    "run {i} reports a different metric set from run 0"
                )));
            }
            if (r.n_test_papers, r.n_excluded) != (first.n_test_papers, first.n_excluded) {
                return Err(Error::InvalidInput(format!(
                    "run {i} was evaluated on a different test set"
                )));
            }
        }
        let mut per_metric = BTreeMap::new();
        for name in first.metrics.keys() {
            let vals: Vec<f64> = runs.iter().map(|r| r.metrics[name]).collect();
            per_metric.insert(name.clone(), aggregate(&vals)?);
        }
        Ok(EvalReport {
            per_metric,
            n_test_papers: first.n_test_papers,
            n_excluded: first.n_excluded,
            runs: runs.into_iter().map(|r| r.metrics).collect(),
        })
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.per_metric.get(metric).copied()
    }

    /// Per-run values of `metric`; `None` if any run lacks it.
    pub fn run_values(&self, metric: &str) -> Option<Vec<f64>> {
        self.runs.iter().map(|r| r.get(metric).copied()).collect()
    }

    /// Text form:
    ///
    /// ```text
    /// n_test_papers<TAB>120
    /// n_excluded<TAB>0
    /// P@1<TAB>0.72
    /// ...
    /// [runs]
    /// 0<TAB>P@1<TAB>0.71
    /// ...
    /// ```
    ///
    /// Values use the shortest representation that reads back exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "n_test_papers\t{}", self.n_test_papers).unwrap();
        writeln!(s, "n_excluded\t{}", self.n_excluded).unwrap();
        for (name, v) in &self.per_metric {
            writeln!(s, "{name}\t{v}").unwrap();
        }
        s.push_str("[runs]\n");
        for (i, run) in self.runs.iter().enumerate() {
            for (name, v) in run {
                writeln!(s, "{i}\t{name}\t{v}").unwrap();
            }
        }
        s
    }

    /// Parses [`Self::to_text`] output. Blank lines and `#` comments are
    /// ignored; the `[runs]` block is optional, so hand-written reports may
    /// list means only.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut report = EvalReport::default();
        let mut in_runs = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "[runs]" {
                in_runs = true;
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let number = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(line_no, format!("invalid number {s:?}")))
            };
            if in_runs {
                let [run, name, value] = fields[..] else {
                    return Err(bad(line_no, "expected run<TAB>metric<TAB>value".into()));
                };
                let run: usize = run
                    .parse()
                    .map_err(|_| bad(line_no, format!("invalid run index {run:?}")))?;
                if run > report.runs.len() {
                    return Err(bad(
                        line_no,
                        format!("run {run} listed before run {}", report.runs.len()),
                    ));
                }
                if run == report.runs.len() {
                    report.runs.push(BTreeMap::new());
                }
                report.runs[run].insert(name.to_string(), number(value)?);
                continue;
            }
            let [key, value] = fields[..] else {
                return Err(bad(line_no, "expected metric<TAB>value".into()));
            };
            match key {
                "n_test_papers" | "n_excluded" => {
                    let v: usize = value
                        .parse()
                        .map_err(|_| bad(line_no, format!("invalid count {value:?}")))?;
                    if key == "n_test_papers" {
                        report.n_test_papers = v;
                    } else {
                        report.n_excluded = v;
                    }
                }
                _ => {
                    report.per_metric.insert(key.to_string(), number(value)?);
                }
            }
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::write_atomic(path, self.to_text().as_bytes())
    }
}

/// Tests every metric both reports carry per run, in metric-name order.
pub fn compare_reports(
    baseline: &EvalReport,
    candidate: &EvalReport,
    kind: TTestKind,
    threshold: f64,
) -> Result<Vec<SignificanceResult>> {
    let mut out = Vec::new();
    for name in baseline.per_metric.keys() {
        let (Some(a), Some(b)) = (baseline.run_values(name), candidate.run_values(name)) else {
            continue;
        };
        if baseline.runs.is_empty() || candidate.runs.is_empty() {
            continue;
        }
        let mut r = t_test(&a, &b, kind, threshold)?;
        r.metric = name.clone();
        out.push(r);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(
            "the reports share no metric with per-run values".into(),
        ));
    }
    Ok(out)
}

/// Tab-separated significance table with a header row.
pub fn format_significance(results: &[SignificanceResult]) -> String {
    let mut s = String::from("metric\tmean_a\tmean_b\tt\tdf\tp_value\tdirection\tthreshold\n");
    for r in results {
        writeln!(
            s,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}\t{:.6e}\t{}\t{}",
            r.metric, r.mean_a, r.mean_b, r.t, r.df, r.p_value, r.direction, r.threshold
        )
        .unwrap();
    }
    s
}
