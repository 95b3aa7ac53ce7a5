//! Datasets: papers, the label taxonomy, year-based splits and the feature index.

mod index;
mod split;
mod taxonomy;
mod tokenize;

pub(crate) use index::hex;
pub use index::{build_feature_index, FeatureIndex};
pub use split::{split_by_year, DatasetSplit};
pub use taxonomy::{load_taxonomy, LabelEntry, Taxonomy};
pub use tokenize::tokenize;
pub(crate) use tokenize::tokens;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

pub const MIN_YEAR: i32 = 1800;
pub const MAX_YEAR: i32 = 2100;

/// A kind of non-text paper attribute that can become a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataKind {
    Venue,
    Author,
    Reference,
}

impl MetadataKind {
    pub const ALL: [MetadataKind; 3] = [MetadataKind::Venue, MetadataKind::Author, MetadataKind::Reference];

    pub fn as_str(self) -> &'static str {
        match self {
            MetadataKind::Venue => "venue",
            MetadataKind::Author => "author",
            MetadataKind::Reference => "reference",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            MetadataKind::Venue => 0,
            MetadataKind::Author => 1,
            MetadataKind::Reference => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for MetadataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetadataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "venue" | "venues" => Ok(MetadataKind::Venue),
            "author" | "authors" => Ok(MetadataKind::Author),
            "reference" | "references" => Ok(MetadataKind::Reference),
            other => Err(Error::InvalidInput(format!(
                "unknown metadata kind {other:?} (expected venue, author or reference)"
            ))),
        }
    }
}

/// One paper: text, metadata identifiers, gold labels and publication year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub venue: Option<String>,
    /// Authorship order is preserved.
    pub authors: Vec<String>,
    pub references: Vec<String>,
    pub labels: BTreeSet<String>,
    pub year: i32,
}

impl Paper {
    /// Title and abstract joined by a space.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + self.abstract_text.len() + 1);
        s.push_str(&self.title);
        s.push(' ');
        s.push_str(&self.abstract_text);
        s
    }

    pub fn metadata(&self, kind: MetadataKind) -> &[String] {
        match kind {
            MetadataKind::Venue => self.venue.as_slice(),
            MetadataKind::Author => &self.authors,
            MetadataKind::Reference => &self.references,
        }
    }
}

/// Field naming used by a dataset file.
///
/// `Native` uses the keys `id`, `title`, `abstract`, `venue`, `authors`,
/// `references`, `labels`, `year`. `Maple` accepts the published benchmark's
/// keys: `paper` for the id, `author`, `reference` and `label` for the lists,
/// and a single `text` field in place of `title` + `abstract` when those are
/// absent (the text then becomes the title and the abstract is empty).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetSchema {
    #[default]
    Native,
    Maple,
}

impl FromStr for DatasetSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "native" => Ok(DatasetSchema::Native),
            "maple" => Ok(DatasetSchema::Maple),
            other => Err(Error::InvalidInput(format!("unknown dataset schema {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetSchema::Native => "native",
            DatasetSchema::Maple => "maple",
        })
    }
}

struct FieldNames {
    id: &'static str,
    authors: &'static str,
    references: &'static str,
    labels: &'static str,
}

impl DatasetSchema {
    fn names(self) -> FieldNames {
        match self {
            DatasetSchema::Native => FieldNames {
                id: "id",
                authors: "authors",
                references: "references",
                labels: "labels",
            },
            DatasetSchema::Maple => FieldNames {
                id: "paper",
                authors: "author",
                references: "reference",
                labels: "label",
            },
        }
    }
}

/// Reads one JSON object per line. Blank lines are skipped.
pub fn load_papers(path: impl AsRef<Path>, schema: DatasetSchema) -> Result<Vec<Paper>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_papers(&content, schema, path)
}

pub(crate) fn parse_papers(content: &str, schema: DatasetSchema, path: &Path) -> Result<Vec<Paper>> {
    let mut papers = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("record is not a JSON object".into()))?;
        let paper = paper_from_record(obj, schema).map_err(malformed)?;
        if let Some(&first_line) = seen.get(&paper.id) {
            return Err(Error::DuplicateId {
                id: paper.id,
                first_line,
                line: line_no,
            });
        }
        seen.insert(paper.id.clone(), line_no);
        papers.push(paper);
    }
    Ok(papers)
}

fn paper_from_record(obj: &Map<String, Value>, schema: DatasetSchema) -> std::result::Result<Paper, String> {
    let names = schema.names();
    let id = required_string(obj, names.id)?;
    if id.is_empty() {
        return Err(format!("field {:?} is empty", names.id));
    }
    let (title, abstract_text) = match schema {
        DatasetSchema::Native => (required_string(obj, "title")?, required_string(obj, "abstract")?),
        DatasetSchema::Maple => {
            if obj.contains_key("title") || obj.contains_key("abstract") {
                (optional_string(obj, "title")?, optional_string(obj, "abstract")?)
            } else {
                (required_string(obj, "text")?, String::new())
            }
        }
    };
    let venue = match obj.get("venue") {
        None if schema == DatasetSchema::Native => return Err("missing field \"venue\"".into()),
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("field \"venue\" must be a string or null".into()),
    };
    let authors = dedup_in_order(string_list(obj, names.authors)?);
    let references = dedup_in_order(string_list(obj, names.references)?);
    let labels: BTreeSet<String> = string_list(obj, names.labels)?.into_iter().collect();
    let year = obj
        .get("year")
        .ok_or_else(|| "missing field \"year\"".to_string())?
        .as_i64()
        .ok_or_else(|| "field \"year\" must be an integer".to_string())?;
    if !(MIN_YEAR as i64..=MAX_YEAR as i64).contains(&year) {
        return Err(format!("year {year} outside [{MIN_YEAR}, {MAX_YEAR}]"));
    }
    Ok(Paper {
        id,
        title,
        abstract_text,
        venue,
        authors,
        references,
        labels,
        year: year as i32,
    })
}

fn required_string(obj: &Map<String, Value>, key: &str) -> std::result::Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field {key:?} must be a string")),
        None => Err(format!("missing field {key:?}")),
    }
}

fn optional_string(obj: &Map<String, Value>, key: &str) -> std::result::Result<String, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field {key:?} must be a string")),
    }
}

fn string_list(obj: &Map<String, Value>, key: &str) -> std::result::Result<Vec<String>, String> {
    let arr = obj
        .get(key)
        .ok_or_else(|| format!("missing field {key:?}"))?
        .as_array()
        .ok_or_else(|| format!("field {key:?} must be an array of strings"))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| format!("field {key:?} must be an array of strings"))
        })
        .collect()
}

fn dedup_in_order(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::with_capacity(items.len());
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

/// Restricts every paper's gold labels to the labels present in `taxonomy`.
///
/// Returns the number of papers left with no gold label.
pub fn restrict_to_taxonomy(papers: &mut [Paper], taxonomy: &Taxonomy) -> usize {
    let mut emptied = 0;
    for paper in papers.iter_mut() {
        paper.labels.retain(|l| taxonomy.contains(l));
        if paper.labels.is_empty() {
            emptied += 1;
        }
    }
    emptied
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(s: &str) -> Result<Vec<Paper>> {
        parse_papers(s, DatasetSchema::Native, &PathBuf::from("fixture.jsonl"))
    }

    fn record(id: &str, year: i32) -> String {
        format!(
            r#"{{"id":"{id}","title":"T","abstract":"A","venue":null,"authors":[],"references":[],"labels":["l1"],"year":{year}}}"#
        )
    }

    #[test]
    fn empty_file_gives_no_papers() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn single_record_round_trips() {
        let papers = parse(&record("p1", 2010)).unwrap();
        assert_eq!(papers.len(), 1);
        let p = &papers[0];
        assert_eq!(p.id, "p1");
        assert_eq!(p.year, 2010);
        assert_eq!(p.labels, BTreeSet::from(["l1".to_string()]));
        assert_eq!(p.venue, None);
    }

    #[test]
    fn malformed_line_is_reported_by_number() {
        let mut lines: Vec<String> = (0..10).map(|i| record(&format!("p{i}"), 2000)).collect();
        lines[6] =
            r#"{"id":"p6","title":"T","abstract":"A","venue":null,"authors":[],"references":[],"labels":["l1"]}"#
                .into();
        let err = parse(&lines.join("\n")).unwrap_err();
        match err {
            Error::Malformed { line, message, .. } => {
                assert_eq!(line, 7);
                assert!(message.contains("year"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invalid_json_is_malformed() {
        let text = format!("{}\n{{not json", record("p1", 2000));
        assert!(matches!(parse(&text), Err(Error::Malformed { line: 2, .. })));
    }

    #[test]
    fn duplicate_ids_are_fatal() {
        let text = format!("{}\n{}", record("p1", 2000), record("p1", 2001));
        assert!(matches!(
            parse(&text),
            Err(Error::DuplicateId {
                first_line: 1,
                line: 2,
                ..
            })
        ));
    }

    #[test]
    fn year_and_id_are_validated() {
        assert!(matches!(parse(&record("p1", 1799)), Err(Error::Malformed { .. })));
        assert!(matches!(parse(&record("", 2000)), Err(Error::Malformed { .. })));
    }

    #[test]
    fn duplicate_metadata_is_collapsed_in_order() {
        let line = r#"{"id":"p","title":"","abstract":"","venue":"v","authors":["b","a","b"],"references":["r","r"],"labels":["x","x"],"year":2000}"#;
        let p = &parse(line).unwrap()[0];
        assert_eq!(p.authors, vec!["b", "a"]);
        assert_eq!(p.references, vec!["r"]);
        assert_eq!(p.labels.len(), 1);
        assert_eq!(p.venue.as_deref(), Some("v"));
    }

    #[test]
    fn maple_schema_adapter() {
        let line = r#"{"paper":"42","venue":"Leonardo","author":["a1"],"reference":["99"],"label":["Art history"],"text":"On painting","year":1990}"#;
        let papers = parse_papers(line, DatasetSchema::Maple, Path::new("m.json")).unwrap();
        let p = &papers[0];
        assert_eq!(p.id, "42");
        assert_eq!(p.title, "On painting");
        assert_eq!(p.abstract_text, "");
        assert_eq!(p.authors, vec!["a1"]);
        assert_eq!(p.metadata(MetadataKind::Reference), ["99".to_string()]);
    }

    #[test]
    fn metadata_kind_parsing() {
        assert_eq!("Venue".parse::<MetadataKind>().unwrap(), MetadataKind::Venue);
        assert_eq!("references".parse::<MetadataKind>().unwrap(), MetadataKind::Reference);
        assert!("journal".parse::<MetadataKind>().is_err());
    }
}
