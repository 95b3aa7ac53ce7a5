//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use mapletag::classifier::{lexical_rerank, NodeClassifier, TrainedTree};
use mapletag::corpus::{tokenize, LabelEntry};
use mapletag::label_tree::build_tree;
use mapletag::{
    LabelRepresentation, LabelTree, MetadataKind, Model, Paper, Prediction, SparseVector, Taxonomy, TrainParams,
    TreeConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Knobs for [`synthetic_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub n_papers: usize,
    pub n_labels: usize,
    /// Probability that a topical word comes from one of the paper's labels
    /// rather than from a random label.
    pub text_signal: f64,
    /// Probability that the venue is the one tied to the paper's first label.
    pub venue_signal: f64,
    pub first_year: i32,
    pub last_year: i32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_papers: 200,
            n_labels: 12,
            text_signal: 0.9,
            venue_signal: 0.9,
            first_year: 2010,
            last_year: 2019,
            seed: 7,
        }
    }
}

pub fn label_id(i: usize) -> String {
    format!("L{i:03}")
}

fn label_words(i: usize) -> Vec<String> {
    (0..6).map(|j| format!("topic{i}x{j}")).collect()
}

/// Labels spread over layers 1..=3; each has a two-token name and one entry
/// term. Labels on layer 2 and 3 have the preceding label as parent.
pub fn synthetic_taxonomy(n_labels: usize) -> Taxonomy {
    let mut entries = BTreeMap::new();
    for i in 0..n_labels {
        let layer = 1 + (i % 3) as u32;
        let parents = if layer > 1 {
            BTreeSet::from([label_id(i - 1)])
        } else {
            BTreeSet::new()
        };
        entries.insert(
            label_id(i),
            LabelEntry {
                names: vec![format!("subject {i}"), format!("alias{i} term")],
                layer,
                parents,
            },
        );
    }
    Taxonomy::new(entries).unwrap()
}

/// Papers with one to three labels whose text and venue carry label signal.
pub fn synthetic_corpus(spec: CorpusSpec) -> (Vec<Paper>, Taxonomy) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_venues = spec.n_labels.max(2);
    let common: Vec<String> = (0..60).map(|j| format!("common{j}")).collect();
    let papers = (0..spec.n_papers)
        .map(|p| {
            let n = rng.gen_range(1..=3.min(spec.n_labels));
            let labels: Vec<usize> = rand::seq::index::sample(&mut rng, spec.n_labels, n).into_vec();
            let mut words = Vec::new();
            for _ in 0..12 {
                let l = if rng.gen_bool(spec.text_signal) {
                    *labels.choose(&mut rng).unwrap()
                } else {
                    rng.gen_range(0..spec.n_labels)
                };
                words.push(label_words(l).choose(&mut rng).unwrap().clone());
            }
            for _ in 0..8 {
                words.push(common.choose(&mut rng).unwrap().clone());
            }
            let venue = if rng.gen_bool(spec.venue_signal) {
                labels[0] % n_venues
            } else {
                rng.gen_range(0..n_venues)
            };
            let authors = (0..rng.gen_range(1..4))
                .map(|_| format!("A{}", labels[0] * 3 + rng.gen_range(0..5)))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let references = (0..rng.gen_range(0..5))
                .map(|_| format!("R{}", rng.gen_range(0..40)))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let split = words.len() / 3;
            Paper {
                id: format!("p{p:05}"),
                title: words[..split].join(" "),
                abstract_text: words[split..].join(" "),
                venue: Some(format!("V{venue}")),
                authors,
                references,
                labels: labels.into_iter().map(label_id).collect(),
                year: rng.gen_range(spec.first_year..=spec.last_year),
            }
        })
        .collect();
    (papers, synthetic_taxonomy(spec.n_labels))
}

pub fn kind_sets() -> Vec<BTreeSet<MetadataKind>> {
    let mut sets = vec![BTreeSet::new()];
    sets.extend(MetadataKind::ALL.iter().map(|&k| BTreeSet::from([k])));
    sets.push(MetadataKind::ALL.into_iter().collect());
    sets
}

pub fn unit(dim: usize, entries: Vec<(u32, f64)>) -> SparseVector<f64> {
    SparseVector::from_unordered(dim, entries).normalized()
}

pub fn random_reps(n: usize, dim: usize, seed: u64) -> Vec<LabelRepresentation<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u32)
        .map(|label| {
            let entries = (0..4)
                .map(|_| (rng.gen_range(0..dim as u32), rng.gen_range(0.1..1.0)))
                .collect();
            LabelRepresentation {
                label,
                vector: unit(dim, entries),
            }
        })
        .collect()
}

pub fn check_tree(tree: &LabelTree, n_labels: usize, max_leaf: usize) {
    let nodes = tree.nodes();
    assert_eq!(tree.root().labels, (0..n_labels as u32).collect::<Vec<_>>());
    for node in nodes {
        match node.children {
            Some([l, r]) => {
                let (a, b) = (&nodes[l].labels, &nodes[r].labels);
                assert!(a.len().abs_diff(b.len()) <= 1);
                let mut union: Vec<u32> = a.iter().chain(b).copied().collect();
                union.sort_unstable();
                assert_eq!(&union, &node.labels, "children must partition the parent");
                assert!(node.labels.len() > max_leaf);
            }
            None => assert!(node.labels.len() <= max_leaf),
        }
    }
}

pub fn random_classifier(rng: &mut ChaCha8Rng, dim: usize) -> NodeClassifier<f64> {
    let entries = (0..6)
        .map(|_| (rng.gen_range(0..dim as u32), rng.gen_range(-3.0..3.0)))
        .collect();
    NodeClassifier::new(SparseVector::from_unordered(dim, entries), rng.gen_range(-1.0..1.0))
}

/// A model with random trees and random classifier weights over a real index.
pub fn random_model(seed: u64, template: &Model<f64>) -> Model<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_labels = rng.gen_range(2..=50);
    let index = template.feature_index().clone();
    let dim = index.dimension();
    let cfg = TreeConfig {
        num_trees: rng.gen_range(1..=3),
        max_leaf_labels: rng.gen_range(2..=8),
        seed,
        ..TreeConfig::default()
    };
    let reps: Vec<LabelRepresentation<f64>> = (0..n_labels as u32)
        .map(|label| LabelRepresentation {
            label,
            vector: SparseVector::from_unordered(dim, vec![(rng.gen_range(0..dim as u32), 1.0)]),
        })
        .collect();
    let trees = (0..cfg.num_trees)
        .map(|t| {
            let tree = build_tree(&reps, &cfg, seed + t as u64);
            let nodes = tree.nodes();
            let routing = (0..nodes.len())
                .map(|i| (i > 0).then(|| random_classifier(&mut rng, dim)))
                .collect();
            let leaf = nodes
                .iter()
                .map(|n| match n.children {
                    Some(_) => Vec::new(),
                    None => n.labels.iter().map(|_| random_classifier(&mut rng, dim)).collect(),
                })
                .collect();
            TrainedTree::new(tree, routing, leaf).unwrap()
        })
        .collect();
    let labels = (0..n_labels).map(|i| format!("L{i:03}")).collect();
    Model::new(index, cfg, TrainParams::default(), labels, trees).unwrap()
}

/// Re-ranks random predictions of papers that mention random label names and
/// checks that every matched label ends above every unmatched one. Returns
/// the number of trials that had both kinds of label.
pub fn check_rerank_dominance(papers: &[Paper], taxonomy: &Taxonomy, trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = taxonomy.iter().map(|(id, _)| id.clone()).collect();
    let mut both_seen = 0;
    for trial in 0..trials {
        let mut paper = papers[trial % papers.len()].clone();
        // Mention a few label names so that matches occur.
        let mentions = rng.gen_range(0..4);
        for l in labels.choose_multiple(&mut rng, mentions) {
            let names = taxonomy.names(l).unwrap();
            paper.abstract_text.push(' ');
            paper.abstract_text.push_str(names.choose(&mut rng).unwrap());
        }
        let mut ranked: Vec<(String, f64)> = labels
            .choose_multiple(&mut rng, 8)
            .map(|l| (l.clone(), rng.gen_range(0.0..=1.0)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let pred = Prediction {
            paper_id: paper.id.clone(),
            ranked,
        };
        let out = lexical_rerank(&pred, &paper, taxonomy);
        let text = tokenize(&paper.text());
        let matched = |l: &str| {
            taxonomy.names(l).unwrap().iter().any(|n| {
                let needle = tokenize(n);
                text.windows(needle.len()).any(|w| w == needle.as_slice())
            })
        };
        let (m, u): (Vec<_>, Vec<_>) = out.ranked.iter().partition(|(l, _)| matched(l));
        if let (Some(min_m), Some(max_u)) = (
            m.iter().map(|e| e.1).reduce(f64::min),
            u.iter().map(|e| e.1).reduce(f64::max),
        ) {
            both_seen += 1;
            assert!(min_m > max_u);
        }
        assert!(out.ranked.iter().all(|(_, s)| (0.0..=2.0).contains(s)));
        let out_set: BTreeSet<_> = out.labels().collect();
        let in_set: BTreeSet<_> = pred.labels().collect();
        assert_eq!(out_set, in_set);
    }
    both_seen
}

/// A two-label taxonomy where the lower-scored label is matched through its
/// second name.
pub fn entry_term_fixture() -> (Taxonomy, Paper, Prediction<f64>) {
    let entries = BTreeMap::from([
        (
            "D009203".to_string(),
            LabelEntry {
                names: vec!["heart attack".into(), "myocardial infarction".into()],
                layer: 1,
                parents: BTreeSet::new(),
            },
        ),
        (
            "D006973".to_string(),
            LabelEntry {
                names: vec!["hypertension".into()],
                layer: 1,
                parents: BTreeSet::new(),
            },
        ),
    ]);
    let taxonomy = Taxonomy::new(entries).unwrap();
    let paper = Paper {
        id: "p".into(),
        title: "Long-term outcomes".into(),
        abstract_text: "Patients after myocardial infarction were followed for ten years.".into(),
        venue: None,
        authors: vec![],
        references: vec![],
        labels: BTreeSet::new(),
        year: 2020,
    };
    let pred = Prediction {
        paper_id: "p".into(),
        ranked: vec![("D006973".to_string(), 0.7f64), ("D009203".to_string(), 0.3)],
    };
    (taxonomy, paper, pred)
}
