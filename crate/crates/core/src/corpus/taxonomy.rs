use crate::error::{Error, Result};
use log::warn;
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

/// One taxonomy label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    /// Canonical name first, then any alternative entry terms.
    pub names: Vec<String>,
    /// Depth below the field root; the root itself (layer 0) is never a label.
    pub layer: u32,
    pub parents: BTreeSet<String>,
}

/// DAG-structured label taxonomy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    entries: BTreeMap<String, LabelEntry>,
    external: BTreeSet<String>,
}

#[derive(Deserialize)]
struct TaxonomyRecord {
    id: String,
    names: Vec<String>,
    layer: u32,
    #[serde(default)]
    parents: Vec<String>,
}

impl Taxonomy {
    /// Validates entries and checks the parent links for cycles.
    ///
    /// Parents that are not themselves entries are recorded as external and a
    /// warning is logged.
    pub fn new(entries: BTreeMap<String, LabelEntry>) -> Result<Self> {
        for (id, entry) in &entries {
            if id.is_empty() {
                return Err(Error::InvalidInput("taxonomy label with empty id".into()));
            }
            if entry.names.is_empty() {
                return Err(Error::InvalidInput(format!("taxonomy label {id:?} has no names")));
            }
            if entry.layer < 1 {
                return Err(Error::InvalidInput(format!(
                    "taxonomy label {id:?} has layer 0; field roots are not labels"
                )));
            }
        }
        let mut external = BTreeSet::new();
        for (id, entry) in &entries {
            for parent in &entry.parents {
                if !entries.contains_key(parent) && external.insert(parent.clone()) {
                    warn!("taxonomy label {id:?} has unknown parent {parent:?}; marked external");
                }
            }
        }
        find_cycle(&entries)?;
        Ok(Taxonomy { entries, external })
    }

    pub fn get(&self, label: &str) -> Option<&LabelEntry> {
        self.entries.get(label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }

    pub fn layer(&self, label: &str) -> Option<u32> {
        self.entries.get(label).map(|e| e.layer)
    }

    pub fn names(&self, label: &str) -> Option<&[String]> {
        self.entries.get(label).map(|e| e.names.as_slice())
    }

    pub fn is_external(&self, id: &str) -> bool {
        self.external.contains(id)
    }

    pub fn external(&self) -> &BTreeSet<String> {
        &self.external
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LabelEntry)> {
        self.entries.iter()
    }

    /// Distinct layers in ascending order.
    pub fn layers(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.entries.values().map(|e| e.layer).collect();
        set.into_iter().collect()
    }
}

/// Reads one JSON object per line with keys `id`, `names`, `layer`, `parents`.
pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = BTreeMap::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: TaxonomyRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let entry = LabelEntry {
            names: rec.names,
            layer: rec.layer,
            parents: rec.parents.into_iter().collect(),
        };
        if entries.insert(rec.id.clone(), entry).is_some() {
            return Err(malformed(format!("duplicate label id {:?}", rec.id)));
        }
    }
    Taxonomy::new(entries)
}

fn find_cycle(entries: &BTreeMap<String, LabelEntry>) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        OnStack,
        Done,
    }
    let ids: Vec<&String> = entries.keys().collect();
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let parents: Vec<Vec<usize>> = ids
        .iter()
        .map(|id| {
            entries[*id]
                .parents
                .iter()
                .filter_map(|p| pos.get(p.as_str()).copied())
                .collect()
        })
        .collect();
    let mut mark = vec![Mark::Unvisited; ids.len()];
    for start in 0..ids.len() {
        if mark[start] != Mark::Unvisited {
            continue;
        }
        // (node, next parent slot)
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::OnStack;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&parent) = parents[node].get(*next) {
                *next += 1;
                match mark[parent] {
                    Mark::Unvisited => {
                        mark[parent] = Mark::OnStack;
                        stack.push((parent, 0));
                    }
                    Mark::OnStack => {
                        let from = stack.iter().position(|&(n, _)| n == parent).unwrap();
                        let cycle = stack[from..].iter().map(|&(n, _)| ids[n].clone()).collect();
                        return Err(Error::TaxonomyCycle(cycle));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    Ok(())
}
