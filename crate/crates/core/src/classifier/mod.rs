//! Node classifiers over label trees, beam-search prediction and re-ranking.
//!
//! Every child of an internal node has a classifier estimating the probability
//! of descending into it, trained on the points routed to the parent (a point
//! is routed to a node when one of its labels lies in the node's subtree).
//! Every label in a leaf has a one-vs-rest classifier trained on the points
//! routed to that leaf.

mod io;
mod logistic;
mod rerank;

pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use logistic::{train_binary, train_logistic, SolverParams, CONSTANT_BIAS};
pub use rerank::{lexical_rerank, name_occurs};

use crate::corpus::{FeatureIndex, Paper};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureConfig, SparseVector};
use crate::label_tree::{build_forest, label_representations, mix_seed, LabelTree, TreeConfig};
use crate::scalar::Real;
use log::{info, warn};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Sparse linear classifier `sigmoid(w.x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClassifier<F> {
    weights: SparseVector<F>,
    bias: F,
}

impl<F: Real> NodeClassifier<F> {
    pub fn new(weights: SparseVector<F>, bias: F) -> Self {
        NodeClassifier { weights, bias }
    }

    pub fn constant(dim: usize, bias: F) -> Self {
        NodeClassifier {
            weights: SparseVector::zeros(dim),
            bias,
        }
    }

    pub fn weights(&self) -> &SparseVector<F> {
        &self.weights
    }

    pub fn bias(&self) -> F {
        self.bias
    }

    pub fn decision(&self, x: &SparseVector<F>) -> F {
        self.weights.dot(x) + self.bias
    }

    pub fn probability(&self, x: &SparseVector<F>) -> F {
        sigmoid(self.decision(x))
    }

    /// Probability against a dense copy of the input; equal to
    /// [`Self::probability`] bit for bit.
    fn probability_dense(&self, x: &[F]) -> F {
        sigmoid(self.weights.dot_dense(x) + self.bias)
    }
}

pub(crate) fn sigmoid<F: Real>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// Training hyperparameters besides the tree shape.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainParams {
    pub solver: SolverParams,
    pub features: FeatureConfig,
}

/// Classifiers attached to one label tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedTree<F> {
    tree: LabelTree,
    /// Routing classifier per node; `None` for the root.
    routing: Vec<Option<NodeClassifier<F>>>,
    /// Per-label classifiers of each leaf, aligned with the leaf's labels;
    /// empty for internal nodes.
    leaf: Vec<Vec<NodeClassifier<F>>>,
}

impl<F: Real> TrainedTree<F> {
    /// Attaches classifiers to `tree`: one routing classifier per non-root
    /// node and, for each leaf, one classifier per label in the leaf's order.
    pub fn new(
        tree: LabelTree,
        routing: Vec<Option<NodeClassifier<F>>>,
        leaf: Vec<Vec<NodeClassifier<F>>>,
    ) -> Result<Self> {
        let nodes = tree.nodes();
        if routing.len() != nodes.len() || leaf.len() != nodes.len() {
            return Err(Error::InvalidInput(
                "classifier lists must have one entry per node".into(),
            ));
        }
        for (id, node) in nodes.iter().enumerate() {
            if routing[id].is_some() != (id != 0) {
                return Err(Error::InvalidInput(format!(
                    "node {id}: exactly the non-root nodes carry routing classifiers"
                )));
            }
            let expected = if node.is_leaf() { node.labels.len() } else { 0 };
            if leaf[id].len() != expected {
                return Err(Error::InvalidInput(format!(
                    "node {id}: expected {expected} leaf classifiers, found {}",
                    leaf[id].len()
                )));
            }
        }
        Ok(TrainedTree { tree, routing, leaf })
    }

    fn classifiers(&self) -> impl Iterator<Item = &NodeClassifier<F>> {
        self.routing.iter().flatten().chain(self.leaf.iter().flatten())
    }

    pub fn tree(&self) -> &LabelTree {
        &self.tree
    }

    pub fn routing_classifier(&self, node: usize) -> Option<&NodeClassifier<F>> {
        self.routing[node].as_ref()
    }

    pub fn leaf_classifiers(&self, node: usize) -> &[NodeClassifier<F>] {
        &self.leaf[node]
    }

    pub fn num_routing_classifiers(&self) -> usize {
        self.routing.iter().filter(|c| c.is_some()).count()
    }

    pub fn num_leaf_classifiers(&self) -> usize {
        self.leaf.iter().map(Vec::len).sum()
    }
}

/// Ranked labels for one paper.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<F> {
    pub paper_id: String,
    /// Non-increasing scores; ties in ascending label id.
    pub ranked: Vec<(String, F)>,
}

impl<F: Real> Prediction<F> {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|(l, _)| l.as_str())
    }

    /// `paper_id<TAB>label:score,...` with six-decimal scores.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(self.paper_id.len() + 24 * self.ranked.len());
        s.push_str(&self.paper_id);
        s.push('\t');
        for (i, (label, score)) in self.ranked.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{label}:{:.6}", score.as_f64()).unwrap();
        }
        s
    }
}

/// Sorts by score descending, then label ascending.
pub(crate) fn sort_ranked<F: Real, L: Ord>(items: &mut [(L, F)]) {
    items.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Trained label-tree ensemble with everything needed to featurize new papers.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    feature_index: FeatureIndex,
    tree_config: TreeConfig,
    params: TrainParams,
    /// Label ids, ascending; label `i` in trees refers to `labels[i]`.
    labels: Vec<String>,
    trees: Vec<TrainedTree<F>>,
}

impl<F: Real> Model<F> {
    /// Assembles a model from trained trees.
    ///
    /// `labels` must be strictly ascending, every tree must place each label in
    /// exactly one leaf, and every classifier must live in the index's feature
    /// space.
    pub fn new(
        feature_index: FeatureIndex,
        tree_config: TreeConfig,
        params: TrainParams,
        labels: Vec<String>,
        trees: Vec<TrainedTree<F>>,
    ) -> Result<Self> {
        if labels.is_empty() || !labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "model labels must be nonempty and strictly ascending".into(),
            ));
        }
        if trees.is_empty() {
            return Err(Error::InvalidInput("a model needs at least one tree".into()));
        }
        let all: Vec<u32> = (0..labels.len() as u32).collect();
        let dim = feature_index.dimension();
        for (t, tree) in trees.iter().enumerate() {
            if tree.tree.root().labels != all {
                return Err(Error::InvalidInput(format!(
                    "tree {t} does not cover every label exactly once"
                )));
            }
            if tree.classifiers().any(|c| c.weights.dim() != dim) {
                return Err(Error::InvalidInput(format!(
                    "tree {t} has classifiers outside the {dim}-dimensional feature space"
                )));
            }
        }
        Ok(Model {
            feature_index,
            tree_config,
            params,
            labels,
            trees,
        })
    }

    /// Builds the label forest from `train` and trains every node classifier.
    ///
    /// Papers without labels are skipped.
    pub fn fit(
        train: &[Paper],
        feature_index: FeatureIndex,
        tree_config: &TreeConfig,
        params: &TrainParams,
    ) -> Result<Self> {
        tree_config.validate()?;
        let labelled: Vec<&Paper> = train.iter().filter(|p| !p.labels.is_empty()).collect();
        if labelled.len() < train.len() {
            warn!(
                "{} training papers have no labels and are skipped",
                train.len() - labelled.len()
            );
        }
        if labelled.is_empty() {
            return Err(Error::InvalidInput("no labelled training papers".into()));
        }
        let labels: Vec<String> = labelled
            .iter()
            .flat_map(|p| p.labels.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let vectors: Vec<SparseVector<F>> = labelled
            .par_iter()
            .map(|p| featurize(p, &feature_index, &params.features))
            .collect();
        let point_labels: Vec<Vec<u32>> = labelled
            .iter()
            .map(|p| {
                p.labels
                    .iter()
                    .map(|l| labels.binary_search(l).unwrap() as u32)
                    .collect()
            })
            .collect();
        let reps = label_representations(&vectors, &point_labels, labels.len(), tree_config.seed)?;
        let forest = build_forest(&reps, tree_config);
        info!(
            "built {} label trees over {} labels ({} training papers)",
            forest.len(),
            labels.len(),
            vectors.len()
        );
        let trees = train_forest(&vectors, &point_labels, forest, &params.solver, tree_config.seed);
        Ok(Model {
            feature_index,
            tree_config: *tree_config,
            params: *params,
            labels,
            trees,
        })
    }

    pub fn feature_index(&self) -> &FeatureIndex {
        &self.feature_index
    }

    pub fn tree_config(&self) -> &TreeConfig {
        &self.tree_config
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn trees(&self) -> &[TrainedTree<F>] {
        &self.trees
    }

    pub fn featurize(&self, paper: &Paper) -> SparseVector<F> {
        featurize(paper, &self.feature_index, &self.params.features)
    }

    /// Label indices and ensemble scores for `x`, best first, at most `top_k`.
    ///
    /// Each tree keeps the `beam_width` best nodes per level by path
    /// probability; leaf label scores are the path probability times the
    /// label classifier's probability. Scores are averaged over trees, a label
    /// not reached in a tree contributing 0.
    pub fn predict_beam(&self, x: &SparseVector<F>, beam_width: usize, top_k: usize) -> Vec<(u32, F)> {
        assert!(beam_width >= 1 && top_k >= 1);
        let dense = x.to_dense();
        let mut totals = vec![F::zero(); self.labels.len()];
        let mut touched: Vec<u32> = Vec::new();
        for tree in &self.trees {
            for (label, score) in tree_scores(tree, &dense, beam_width) {
                if totals[label as usize] == F::zero() {
                    touched.push(label);
                }
                totals[label as usize] += score;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let n_trees = F::from_usize(self.trees.len()).unwrap();
        let mut ranked: Vec<(u32, F)> = touched.into_iter().map(|l| (l, totals[l as usize] / n_trees)).collect();
        sort_ranked(&mut ranked);
        ranked.truncate(top_k);
        ranked
    }

    pub fn predict(&self, paper: &Paper, beam_width: usize, top_k: usize) -> Prediction<F> {
        let x = self.featurize(paper);
        Prediction {
            paper_id: paper.id.clone(),
            ranked: self
                .predict_beam(&x, beam_width, top_k)
                .into_iter()
                .map(|(l, s)| (self.labels[l as usize].clone(), s))
                .collect(),
        }
    }

    /// Predicts many papers in parallel; output order follows input order.
    pub fn predict_all(&self, papers: &[Paper], beam_width: usize, top_k: usize) -> Vec<Prediction<F>> {
        papers.par_iter().map(|p| self.predict(p, beam_width, top_k)).collect()
    }
}

/// Label scores reached by the beam in one tree.
fn tree_scores<F: Real>(tree: &TrainedTree<F>, x: &[F], beam_width: usize) -> Vec<(u32, F)> {
    let nodes = tree.tree.nodes();
    let mut beam: Vec<(usize, F)> = vec![(0, F::one())];
    while beam.iter().any(|&(n, _)| !nodes[n].is_leaf()) {
        let mut next = Vec::with_capacity(2 * beam.len());
        for &(n, score) in &beam {
            match nodes[n].children {
                None => next.push((n, score)),
                Some(children) => {
                    for c in children {
                        let cls = tree.routing[c].as_ref().expect("non-root nodes have classifiers");
                        next.push((c, score * cls.probability_dense(x)));
                    }
                }
            }
        }
        sort_ranked(&mut next);
        next.truncate(beam_width);
        beam = next;
    }
    let mut out = Vec::new();
    for (n, path) in beam {
        for (&label, cls) in nodes[n].labels.iter().zip(&tree.leaf[n]) {
            out.push((label, path * cls.probability_dense(x)));
        }
    }
    out
}

enum Task {
    Routing { parent: usize, child: usize },
    Leaf { node: usize, slot: usize },
}

/// Trains all classifiers of every tree. Each classifier gets its own seed, so
/// the result does not depend on scheduling.
pub(crate) fn train_forest<F: Real>(
    vectors: &[SparseVector<F>],
    point_labels: &[Vec<u32>],
    forest: Vec<LabelTree>,
    solver: &SolverParams,
    seed: u64,
) -> Vec<TrainedTree<F>> {
    forest
        .into_iter()
        .enumerate()
        .map(|(t, tree)| train_tree(vectors, point_labels, tree, solver, mix_seed(seed, 1000 + t as u64)))
        .collect()
}

fn train_tree<F: Real>(
    vectors: &[SparseVector<F>],
    point_labels: &[Vec<u32>],
    tree: LabelTree,
    solver: &SolverParams,
    seed: u64,
) -> TrainedTree<F> {
    let nodes = tree.nodes();
    let routed = route_points(&tree, point_labels);
    let dim = vectors.first().map_or(0, SparseVector::dim);

    let mut tasks = Vec::new();
    for (id, node) in nodes.iter().enumerate() {
        match node.children {
            Some([l, r]) => {
                tasks.push(Task::Routing { parent: id, child: l });
                tasks.push(Task::Routing { parent: id, child: r });
            }
            None => tasks.extend((0..node.labels.len()).map(|slot| Task::Leaf { node: id, slot })),
        }
    }

    let trained: Vec<NodeClassifier<F>> = tasks
        .par_iter()
        .enumerate()
        .map(|(k, task)| {
            let (pool, targets): (&[u32], Vec<bool>) = match *task {
                Task::Routing { parent, child } => {
                    let pool = &routed[parent];
                    let inside = &routed[child];
                    (pool, pool.iter().map(|p| inside.binary_search(p).is_ok()).collect())
                }
                Task::Leaf { node, slot } => {
                    let label = nodes[node].labels[slot];
                    let pool = &routed[node];
                    (
                        pool,
                        pool.iter()
                            .map(|&p| point_labels[p as usize].binary_search(&label).is_ok())
                            .collect(),
                    )
                }
            };
            if pool.is_empty() {
                warn!("tree node has no routed training points; using a constant classifier");
                return NodeClassifier::constant(dim, F::from_f64_lossy(-CONSTANT_BIAS));
            }
            let xs: Vec<&SparseVector<F>> = pool.iter().map(|&p| &vectors[p as usize]).collect();
            train_binary(&xs, &targets, solver, mix_seed(seed, k as u64))
        })
        .collect();

    let mut routing: Vec<Option<NodeClassifier<F>>> = vec![None; nodes.len()];
    let mut leaf: Vec<Vec<NodeClassifier<F>>> = vec![Vec::new(); nodes.len()];
    for (task, cls) in tasks.into_iter().zip(trained) {
        match task {
            Task::Routing { child, .. } => routing[child] = Some(cls),
            Task::Leaf { node, .. } => leaf[node].push(cls),
        }
    }
    TrainedTree { tree, routing, leaf }
}

/// Ascending point ids routed to each node.
fn route_points(tree: &LabelTree, point_labels: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let nodes = tree.nodes();
    let mut parent = vec![usize::MAX; nodes.len()];
    let mut leaf_of: Vec<usize> = Vec::new();
    for (id, node) in nodes.iter().enumerate() {
        if let Some(children) = node.children {
            for c in children {
                parent[c] = id;
            }
        } else {
            for &l in &node.labels {
                if leaf_of.len() <= l as usize {
                    leaf_of.resize(l as usize + 1, usize::MAX);
                }
                leaf_of[l as usize] = id;
            }
        }
    }
    let mut routed = vec![Vec::new(); nodes.len()];
    let mut last_point = vec![u32::MAX; nodes.len()];
    for (p, labels) in point_labels.iter().enumerate() {
        let p = p as u32;
        for &l in labels {
            let mut n = leaf_of[l as usize];
            while n != usize::MAX && last_point[n] != p {
                last_point[n] = p;
                routed[n].push(p);
                n = parent[n];
            }
        }
    }
    routed
}
