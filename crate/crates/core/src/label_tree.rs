//! Balanced binary label trees.
//!
//! Every label is represented by the normalized mean of the feature vectors of
//! its training papers. A tree is grown by splitting the label set in two with
//! balanced spherical 2-means until every node holds at most
//! [`TreeConfig::max_leaf_labels`] labels.

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::scalar::Real;
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Subtrees with more labels than this are built in parallel.
const PARALLEL_SPLIT_MIN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub num_trees: usize,
    pub max_leaf_labels: usize,
    pub seed: u64,
    pub max_kmeans_iters: usize,
    /// Stop clustering once the mean similarity improves by less than this.
    pub kmeans_tolerance: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            num_trees: 3,
            max_leaf_labels: 100,
            seed: 0,
            max_kmeans_iters: 50,
            kmeans_tolerance: 1e-4,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees < 1 {
            return Err(Error::InvalidInput("num_trees must be at least 1".into()));
        }
        if self.max_leaf_labels < 2 {
            return Err(Error::InvalidInput("max_leaf_labels must be at least 2".into()));
        }
        if self.max_kmeans_iters < 1 {
            return Err(Error::InvalidInput("max_kmeans_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Unit-norm direction of the mean feature vector of a label's papers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRepresentation<F> {
    pub label: u32,
    pub vector: SparseVector<F>,
}

/// Computes one representation per label `0..n_labels`.
///
/// `labels[i]` lists the label indices of point `i`. A label whose mean is the
/// zero vector gets a seeded random unit vector instead, with a warning.
pub fn label_representations<F: Real>(
    points: &[SparseVector<F>],
    labels: &[Vec<u32>],
    n_labels: usize,
    seed: u64,
) -> Result<Vec<LabelRepresentation<F>>> {
    assert_eq!(points.len(), labels.len());
    let dim = points.first().map_or(0, SparseVector::dim);
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); n_labels];
    for (i, ls) in labels.iter().enumerate() {
        for &l in ls {
            members[l as usize].push(i as u32);
        }
    }
    if let Some(l) = members.iter().position(Vec::is_empty) {
        return Err(Error::LabelWithoutPoints(format!("#{l}")));
    }
    let reps = members
        .par_iter()
        .enumerate()
        .map_init(
            || (vec![F::zero(); dim], Vec::<u32>::new()),
            |(acc, touched), (label, pts)| {
                for &p in pts {
                    for (i, v) in points[p as usize].iter() {
                        if acc[i] == F::zero() {
                            touched.push(i as u32);
                        }
                        acc[i] += v;
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                let count = F::from_usize(pts.len()).unwrap();
                let mut entries = Vec::with_capacity(touched.len());
                for &i in touched.iter() {
                    let v = acc[i as usize] / count;
                    if v != F::zero() {
                        entries.push((i, v));
                    }
                    acc[i as usize] = F::zero();
                }
                touched.clear();
                let mut vector = SparseVector::from_unordered(dim, entries);
                if vector.is_zero() {
                    warn!("label #{label} has an all-zero mean feature vector; using a random direction");
                    vector = random_unit_vector(dim, mix_seed(seed, label as u64));
                } else {
                    vector.normalize();
                }
                LabelRepresentation {
                    label: label as u32,
                    vector,
                }
            },
        )
        .collect();
    Ok(reps)
}

fn random_unit_vector<F: Real>(dim: usize, seed: u64) -> SparseVector<F> {
    if dim == 0 {
        return SparseVector::zeros(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = dim.min(8);
    let entries = (0..support)
        .map(|_| {
            let i = rng.gen_range(0..dim) as u32;
            let v: f64 = rng.gen_range(0.5..1.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            (i, F::from_f64_lossy(v))
        })
        .collect();
    SparseVector::from_unordered(dim, entries).normalized()
}

/// SplitMix64 step over `seed` and a salt, for deriving independent seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splits `reps` into two groups of sizes `ceil(n/2)` and `floor(n/2)`.
///
/// Returns the label ids of each group in ascending order.
pub fn balanced_2means<F: Real>(
    reps: &[LabelRepresentation<F>],
    seed: u64,
    config: &TreeConfig,
) -> (Vec<u32>, Vec<u32>) {
    let mut members: Vec<&LabelRepresentation<F>> = reps.iter().collect();
    members.sort_by_key(|r| r.label);
    let (a, b) = split_members(&members, seed, config);
    (
        a.iter().map(|&i| members[i].label).collect(),
        b.iter().map(|&i| members[i].label).collect(),
    )
}

/// Balanced spherical 2-means over `members`, which must be sorted by label.
///
/// Returns positions into `members`, each group ascending.
fn split_members<F: Real>(
    members: &[&LabelRepresentation<F>],
    seed: u64,
    config: &TreeConfig,
) -> (Vec<usize>, Vec<usize>) {
    let n = members.len();
    assert!(n >= 2, "need at least two labels to split");
    if n == 2 {
        return (vec![0], vec![1]);
    }
    let dim = members[0].vector.dim();
    let left_size = n.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = [vec![F::zero(); dim], vec![F::zero(); dim]];
    let mut in_left = vec![false; n];
    let mut seeded = false;
    for _ in 0..10 {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if members[i].vector != members[j].vector {
            members[i].vector.axpy_into(F::one(), &mut centroids[0]);
            members[j].vector.axpy_into(F::one(), &mut centroids[1]);
            seeded = true;
            break;
        }
    }
    if !seeded {
        for (k, flag) in in_left.iter_mut().enumerate() {
            *flag = k % 2 == 0;
        }
        update_centroids(members, &in_left, &mut centroids);
    }

    let mut order: Vec<(usize, F)> = Vec::with_capacity(n);
    let mut prev_objective = F::neg_infinity();
    let tolerance = F::from_f64_lossy(config.kmeans_tolerance);
    for iter in 0..config.max_kmeans_iters {
        order.clear();
        order.extend(
            members
                .iter()
                .enumerate()
                .map(|(k, r)| (k, r.vector.dot_dense(&centroids[0]) - r.vector.dot_dense(&centroids[1]))),
        );
        // larger preference for the left centroid first; ties by label
        order.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        let mut next = vec![false; n];
        for &(k, _) in &order[..left_size] {
            next[k] = true;
        }
        let objective = members
            .iter()
            .zip(&next)
            .map(|(r, &left)| r.vector.dot_dense(&centroids[if left { 0 } else { 1 }]))
            .sum::<F>()
            / F::from_usize(n).unwrap();
        let unchanged = iter > 0 && next == in_left;
        in_left = next;
        if unchanged || objective - prev_objective < tolerance {
            break;
        }
        prev_objective = objective;
        update_centroids(members, &in_left, &mut centroids);
    }
    let left = (0..n).filter(|&k| in_left[k]).collect();
    let right = (0..n).filter(|&k| !in_left[k]).collect();
    (left, right)
}

fn update_centroids<F: Real>(members: &[&LabelRepresentation<F>], in_left: &[bool], centroids: &mut [Vec<F>; 2]) {
    for c in centroids.iter_mut() {
        c.iter_mut().for_each(|v| *v = F::zero());
    }
    for (r, &left) in members.iter().zip(in_left) {
        r.vector.axpy_into(F::one(), &mut centroids[if left { 0 } else { 1 }]);
    }
    for c in centroids.iter_mut() {
        let norm = c.iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm > F::zero() {
            c.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// One node of a [`LabelTree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    /// Left and right child ids; `None` for leaves.
    pub children: Option<[usize; 2]>,
    /// Labels covered by the subtree, ascending.
    pub labels: Vec<u32>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Binary label tree stored in pre-order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTree {
    nodes: Vec<TreeNode>,
}

impl LabelTree {
    /// Checks that `nodes` form a pre-order binary tree rooted at 0 whose
    /// children partition their parent's labels.
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("invalid label tree: {msg}")));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        if nodes[0].depth != 0 {
            return bad("root depth must be 0".into());
        }
        let mut has_parent = vec![false; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            if node.labels.is_empty() || !node.labels.windows(2).all(|w| w[0] < w[1]) {
                return bad(format!("node {id} labels must be nonempty and strictly ascending"));
            }
            let Some([l, r]) = node.children else { continue };
            for c in [l, r] {
                if c <= id || c >= nodes.len() || has_parent[c] || nodes[c].depth != node.depth + 1 {
                    return bad(format!("node {id} has an invalid child {c}"));
                }
                has_parent[c] = true;
            }
            if l == r {
                return bad(format!("node {id} lists the same child twice"));
            }
            let mut union: Vec<u32> = nodes[l].labels.iter().chain(&nodes[r].labels).copied().collect();
            union.sort_unstable();
            if union != node.labels {
                return bad(format!("children of node {id} do not partition its labels"));
            }
        }
        if let Some(orphan) = (1..nodes.len()).find(|&i| !has_parent[i]) {
            return bad(format!("node {orphan} is unreachable"));
        }
        Ok(LabelTree { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &TreeNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf())
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Maximum leaf depth; a single-leaf tree has depth 0.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Children of internal nodes, i.e. the number of routing classifiers.
    pub fn num_internal_children(&self) -> usize {
        2 * self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    /// One line per node, `node_id depth leaf? label_count`, indented by depth.
    pub fn topology_dump(&self) -> String {
        let mut s = String::new();
        for (id, n) in self.nodes.iter().enumerate() {
            writeln!(
                s,
                "{:indent$}{id} {} {} {}",
                "",
                n.depth,
                if n.is_leaf() { "leaf" } else { "internal" },
                n.labels.len(),
                indent = 2 * n.depth
            )
            .unwrap();
        }
        s
    }
}

enum Subtree {
    Leaf(Vec<u32>),
    Split(Vec<u32>, Box<Subtree>, Box<Subtree>),
}

fn grow<F: Real>(members: Vec<&LabelRepresentation<F>>, seed: u64, config: &TreeConfig) -> Subtree {
    let labels: Vec<u32> = members.iter().map(|r| r.label).collect();
    if members.len() <= config.max_leaf_labels {
        return Subtree::Leaf(labels);
    }
    let (a, b) = split_members(&members, seed, config);
    let left: Vec<_> = a.iter().map(|&k| members[k]).collect();
    let right: Vec<_> = b.iter().map(|&k| members[k]).collect();
    let (ls, rs) = (mix_seed(seed, 1), mix_seed(seed, 2));
    let (l, r) = if members.len() >= PARALLEL_SPLIT_MIN {
        rayon::join(|| grow(left, ls, config), || grow(right, rs, config))
    } else {
        (grow(left, ls, config), grow(right, rs, config))
    };
    Subtree::Split(labels, Box::new(l), Box::new(r))
}

fn flatten(tree: Subtree, depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
    let id = nodes.len();
    match tree {
        Subtree::Leaf(labels) => nodes.push(TreeNode {
            children: None,
            labels,
            depth,
        }),
        Subtree::Split(labels, l, r) => {
            nodes.push(TreeNode {
                children: None,
                labels,
                depth,
            });
            let li = flatten(*l, depth + 1, nodes);
            let ri = flatten(*r, depth + 1, nodes);
            nodes[id].children = Some([li, ri]);
        }
    }
    id
}

/// Recursively splits `reps` until every leaf holds at most
/// `config.max_leaf_labels` labels.
pub fn build_tree<F: Real>(reps: &[LabelRepresentation<F>], config: &TreeConfig, seed: u64) -> LabelTree {
    assert!(!reps.is_empty(), "cannot build a tree over zero labels");
    let mut members: Vec<&LabelRepresentation<F>> = reps.iter().collect();
    members.sort_by_key(|r| r.label);
    let mut nodes = Vec::new();
    flatten(grow(members, seed, config), 0, &mut nodes);
    LabelTree { nodes }
}

/// `config.num_trees` trees seeded `config.seed`, `config.seed + 1`, ...
pub fn build_forest<F: Real>(reps: &[LabelRepresentation<F>], config: &TreeConfig) -> Vec<LabelTree> {
    (0..config.num_trees)
        .into_par_iter()
        .map(|t| build_tree(reps, config, config.seed.wrapping_add(t as u64)))
        .collect()
}
