//! Dataset files on disk and a handle on the built binary.
#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod common;

use common::{synthetic_corpus, CorpusSpec};
use mapletag::{Paper, Taxonomy};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write_papers(&self, name: &str, papers: &[Paper]) -> PathBuf {
        let text: String = papers
            .iter()
            .map(|p| serde_json::to_string(p).unwrap() + "\n")
            .collect();
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    pub fn write_taxonomy(&self, name: &str, taxonomy: &Taxonomy) -> PathBuf {
        let text: String = taxonomy
            .iter()
            .map(|(id, e)| {
                json!({"id": id, "names": e.names, "layer": e.layer, "parents": e.parents}).to_string() + "\n"
            })
            .collect();
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    /// Writes the default synthetic corpus and its taxonomy; returns
    /// `(dataset, taxonomy)` paths.
    pub fn standard_corpus(&self, spec: CorpusSpec) -> (PathBuf, PathBuf) {
        let (papers, taxonomy) = synthetic_corpus(spec);
        (
            self.write_papers("papers.jsonl", &papers),
            self.write_taxonomy("taxonomy.jsonl", &taxonomy),
        )
    }
}

pub fn small_spec() -> CorpusSpec {
    CorpusSpec {
        n_papers: 300,
        ..CorpusSpec::default()
    }
}

/// Runs the binary with `args`.
pub fn mapletag<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_mapletag"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn assert_success(out: &Output) {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), stderr(out));
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
