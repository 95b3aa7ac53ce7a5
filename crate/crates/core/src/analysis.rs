//! Per-field metadata effect vectors.
//!
//! For every (classifier, metadata) combination evaluated on a field, the
//! relative change of mean P@1, P@3 and P@5 from the text-only run to the
//! text+metadata run forms three components. Components are ordered
//! combination-major (combination tags ascending), metric-minor (P@1, P@3, P@5).

use crate::error::{Error, Result};
use crate::eval::{delta, DeltaMode, EvalReport};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Metrics making up each combination's block of components.
pub const EFFECT_METRICS: [&str; 3] = ["P@1", "P@3", "P@5"];

#[derive(Debug, Clone, PartialEq)]
pub struct EffectComponent {
    pub combo: String,
    pub metric: String,
    pub relative_change: f64,
}

impl EffectComponent {
    /// `combo:metric`, used as the CSV column name.
    pub fn tag(&self) -> String {
        format!("{}:{}", self.combo, self.metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectVector {
    pub field: String,
    pub components: Vec<EffectComponent>,
}

impl EffectVector {
    pub fn values(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.relative_change).collect()
    }

    pub fn tags(&self) -> Vec<String> {
        self.components.iter().map(EffectComponent::tag).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Builds the effect vector of `field` from `(text_only, with_metadata)`
/// report pairs keyed by combination tag.
pub fn effect_vector(field: &str, reports: &BTreeMap<String, (EvalReport, EvalReport)>) -> Result<EffectVector> {
    let mut components = Vec::with_capacity(EFFECT_METRICS.len() * reports.len());
    for (combo, (text_only, with_meta)) in reports {
        for metric in EFFECT_METRICS {
            let missing = || Error::MissingMetric {
                combo: combo.clone(),
                metric: metric.to_string(),
            };
            let base = text_only.mean(metric).ok_or_else(missing)?;
            let with = with_meta.mean(metric).ok_or_else(missing)?;
            components.push(EffectComponent {
                combo: combo.clone(),
                metric: metric.to_string(),
                relative_change: delta(with, base, DeltaMode::Relative)?,
            });
        }
    }
    Ok(EffectVector {
        field: field.to_string(),
        components,
    })
}

fn check_cell(s: &str) -> Result<()> {
    if s.contains([',', '\n', '\r', '"']) {
        return Err(Error::InvalidInput(format!("{s:?} cannot be written as a CSV cell")));
    }
    Ok(())
}

/// CSV text: a header `field,<tag>,...` then one row per vector with
/// six-decimal values. All vectors must share the same component tags.
pub fn format_vectors(vectors: &[EffectVector]) -> Result<String> {
    let tags = vectors.first().map(EffectVector::tags).unwrap_or_default();
    for v in vectors {
        if v.tags() != tags {
            return Err(Error::InvalidInput(format!(
                "effect vector for {:?} has components {:?}, expected {:?}",
                v.field,
                v.tags(),
                tags
            )));
        }
        check_cell(&v.field)?;
    }
    let mut s = String::from("field");
    for t in &tags {
        check_cell(t)?;
        s.push(',');
        s.push_str(t);
    }
    s.push('\n');
    for v in vectors {
        s.push_str(&v.field);
        for c in &v.components {
            write!(s, ",{:.6}", c.relative_change).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn export_vectors(vectors: &[EffectVector], path: impl AsRef<Path>) -> Result<()> {
    crate::write_atomic(path, format_vectors(vectors)?.as_bytes())
}

/// Parses [`format_vectors`] output.
pub fn parse_vectors(text: &str, path: &Path) -> Result<Vec<EffectVector>> {
    let bad = |line: usize, message: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(bad(1, "missing header".into()));
    };
    let mut columns = header.split(',');
    if columns.next() != Some("field") {
        return Err(bad(1, "header must start with \"field\"".into()));
    }
    let tags: Vec<(String, String)> = columns
        .map(|t| {
            t.rsplit_once(':')
                .map(|(c, m)| (c.to_string(), m.to_string()))
                .ok_or_else(|| bad(1, format!("column {t:?} is not combo:metric")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let field = cells.next().unwrap_or_default().to_string();
        let values: Vec<&str> = cells.collect();
        if values.len() != tags.len() {
            return Err(bad(
                n + 1,
                format!("expected {} values, found {}", tags.len(), values.len()),
            ));
        }
        let components = tags
            .iter()
            .zip(values)
            .map(|((combo, metric), v)| {
                let relative_change = v.parse().map_err(|_| bad(n + 1, format!("invalid number {v:?}")))?;
                Ok(EffectComponent {
                    combo: combo.clone(),
                    metric: metric.clone(),
                    relative_change,
                })
            })
            .collect::<Result<_>>()?;
        out.push(EffectVector { field, components });
    }
    Ok(out)
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<Vec<EffectVector>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vectors(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn means(values: &[(&str, f64)]) -> EvalReport {
        EvalReport {
            per_metric: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ..Default::default()
        }
    }

    fn art_pair() -> (EvalReport, EvalReport) {
        (
            means(&[("P@1", 0.7203), ("P@3", 0.4829), ("P@5", 0.3392)]),
            means(&[("P@1", 0.7235), ("P@3", 0.4861), ("P@5", 0.3417)]),
        )
    }

    #[test]
    fn published_art_venue_triple() {
        let reports = BTreeMap::from([("parabel+venue".to_string(), art_pair())]);
        let v = effect_vector("Art", &reports).unwrap();
        let expected = [0.00444, 0.00663, 0.00737];
        for (got, want) in v.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
        assert_eq!(
            v.tags(),
            ["parabel+venue:P@1", "parabel+venue:P@3", "parabel+venue:P@5"]
        );
    }

    #[test]
    fn identical_reports_give_zero_vector() {
        let (a, _) = art_pair();
        let reports = BTreeMap::from([("x".to_string(), (a.clone(), a))]);
        assert!(effect_vector("F", &reports).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eight_combos_give_24_components_in_combo_order() {
        let reports: BTreeMap<String, _> = (0..8).rev().map(|i| (format!("c{i}"), art_pair())).collect();
        let v = effect_vector("Art", &reports).unwrap();
        assert_eq!(v.len(), 24);
        assert_eq!(v.components[0].combo, "c0");
        assert_eq!(v.components[3].tag(), "c1:P@1");
    }

    #[test]
    fn missing_metric_names_combo_and_metric() {
        let reports = BTreeMap::from([(
            "parabel+author".to_string(),
            (
                means(&[("P@1", 0.5), ("P@3", 0.4)]),
                means(&[("P@1", 0.5), ("P@3", 0.4), ("P@5", 0.3)]),
            ),
        )]);
        match effect_vector("F", &reports) {
            Err(Error::MissingMetric { combo, metric }) => {
                assert_eq!((combo.as_str(), metric.as_str()), ("parabel+author", "P@5"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_and_shape() {
        let reports: BTreeMap<String, _> = (0..8).map(|i| (format!("c{i}"), art_pair())).collect();
        let a = effect_vector("Art", &reports).unwrap();
        let mut b = effect_vector("Biology", &reports).unwrap();
        b.components[5].relative_change = -0.123456789;
        let text = format_vectors(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back = parse_vectors(&text, Path::new("v.csv")).unwrap();
        for (orig, read) in [a, b].iter().zip(&back) {
            assert_eq!(orig.field, read.field);
            assert_eq!(orig.tags(), read.tags());
            for (x, y) in orig.values().iter().zip(read.values()) {
                assert!((x - y).abs() <= 5e-7);
            }
        }
    }

    #[test]
    fn empty_list_is_header_only_and_mismatch_is_rejected() {
        assert_eq!(format_vectors(&[]).unwrap(), "field\n");
        let one = BTreeMap::from([("a".to_string(), art_pair())]);
        let two = BTreeMap::from([("a".to_string(), art_pair()), ("b".to_string(), art_pair())]);
        let err = format_vectors(&[effect_vector("X", &one).unwrap(), effect_vector("Y", &two).unwrap()]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
