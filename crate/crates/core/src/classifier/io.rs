//! Binary model container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "MAPLTAG1" | version u32 | scalar width u32
//! feature index | feature-index fingerprint | feature config
//! tree config | solver params | labels
//! tree topologies
//! classifier weights (bias, nnz, indices u32[], weights scalar[])
//! SHA-256 of every preceding byte
//! ```

use super::{Model, NodeClassifier, SolverParams, TrainParams, TrainedTree};
use crate::codec::{Reader, Writer};
use crate::corpus::FeatureIndex;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, SparseVector};
use crate::label_tree::{LabelTree, TreeConfig, TreeNode};
use crate::scalar::Real;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"MAPLTAG1";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;
const HEADER_LEN: usize = 8 + 4 + 4;

/// Writes the model atomically (temporary file, then rename).
pub fn save_model<F: Real>(model: &Model<F>, path: impl AsRef<Path>) -> Result<()> {
    crate::write_atomic(path, &model.to_bytes())
}

pub fn load_model<F: Real>(path: impl AsRef<Path>) -> Result<Model<F>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Model::from_bytes(&bytes)
}

fn write_classifier<F: Real>(w: &mut Writer, c: &NodeClassifier<F>) {
    w.scalar(c.bias());
    w.len(c.weights().nnz());
    for &i in c.weights().indices() {
        w.u32(i);
    }
    for &v in c.weights().values() {
        w.scalar(v);
    }
}

fn read_classifier<F: Real>(r: &mut Reader, dim: usize) -> Result<NodeClassifier<F>> {
    let bias = r.scalar::<F>()?;
    let nnz = r.len()?;
    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        entries.push((r.u32()?, F::zero()));
    }
    for e in entries.iter_mut() {
        e.1 = r.scalar::<F>()?;
    }
    let weights = SparseVector::new(dim, entries).map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(NodeClassifier::new(weights, bias))
}

impl<F: Real> Model<F> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u32(F::WIDTH as u32);

        self.feature_index.encode(&mut w);
        w.str(&self.feature_index.fingerprint());
        let fc = &self.params.features;
        w.u8(fc.normalize as u8);
        w.f64(fc.text_weight);
        w.f64(fc.metadata_weight);

        let tc = &self.tree_config;
        w.len(tc.num_trees);
        w.len(tc.max_leaf_labels);
        w.u64(tc.seed);
        w.len(tc.max_kmeans_iters);
        w.f64(tc.kmeans_tolerance);
        let sp = &self.params.solver;
        w.f64(sp.reg_c);
        w.f64(sp.tol);
        w.len(sp.max_iters);
        w.f64(sp.weight_threshold);

        w.len(self.labels.len());
        for l in &self.labels {
            w.str(l);
        }

        w.len(self.trees.len());
        for t in &self.trees {
            let nodes = t.tree.nodes();
            w.len(nodes.len());
            for n in nodes {
                w.len(n.depth);
                match n.children {
                    Some([a, b]) => {
                        w.u8(1);
                        w.len(a);
                        w.len(b);
                    }
                    None => w.u8(0),
                }
                w.len(n.labels.len());
                for &l in &n.labels {
                    w.u32(l);
                }
            }
        }

        for t in &self.trees {
            for c in t.routing.iter().flatten() {
                write_classifier(&mut w, c);
            }
            for c in t.leaf.iter().flatten() {
                write_classifier(&mut w, c);
            }
        }

        let digest = Sha256::digest(&w.buf);
        w.buf.extend_from_slice(&digest);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(MAGIC).into_owned(),
                found: String::from_utf8_lossy(&bytes[..MAGIC.len()]).into_owned(),
            });
        }
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(Error::Checksum {
                stored: "<missing>".into(),
                computed: format!("file too short ({} bytes)", bytes.len()),
            });
        }
        let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        let computed = Sha256::digest(body);
        if computed.as_slice() != stored {
            return Err(Error::Checksum {
                stored: crate::corpus::hex(stored),
                computed: crate::corpus::hex(&computed),
            });
        }

        let mut r = Reader::new(&body[MAGIC.len()..]);
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        let width = r.u32()? as usize;
        if width != F::WIDTH {
            return Err(Error::ScalarWidthMismatch {
                expected: F::WIDTH,
                found: width,
            });
        }

        let feature_index = FeatureIndex::decode(&mut r)?;
        let stored_fp = r.str()?;
        let fp = feature_index.fingerprint();
        if stored_fp != fp {
            return Err(Error::FeatureIndexMismatch {
                expected: stored_fp,
                found: fp,
            });
        }
        let features = FeatureConfig {
            normalize: r.u8()? != 0,
            text_weight: r.f64()?,
            metadata_weight: r.f64()?,
        };
        let tree_config = TreeConfig {
            num_trees: r.u64()? as usize,
            max_leaf_labels: r.u64()? as usize,
            seed: r.u64()?,
            max_kmeans_iters: r.u64()? as usize,
            kmeans_tolerance: r.f64()?,
        };
        let solver = SolverParams {
            reg_c: r.f64()?,
            tol: r.f64()?,
            max_iters: r.u64()? as usize,
            weight_threshold: r.f64()?,
        };

        let n_labels = r.len()?;
        let mut labels = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            labels.push(r.str()?);
        }

        let n_trees = r.len()?;
        let mut topologies = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.len()?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let depth = r.u64()? as usize;
                let children = match r.u8()? {
                    0 => None,
                    1 => Some([r.u64()? as usize, r.u64()? as usize]),
                    other => return Err(Error::Corrupt(format!("bad node tag {other}"))),
                };
                let n = r.len()?;
                let mut node_labels = Vec::with_capacity(n);
                for _ in 0..n {
                    node_labels.push(r.u32()?);
                }
                nodes.push(TreeNode {
                    children,
                    labels: node_labels,
                    depth,
                });
            }
            topologies.push(LabelTree::new(nodes).map_err(|e| Error::Corrupt(e.to_string()))?);
        }

        let dim = feature_index.dimension();
        let mut trees = Vec::with_capacity(n_trees);
        for tree in topologies {
            let nodes = tree.nodes();
            let mut routing = Vec::with_capacity(nodes.len());
            routing.push(None);
            for _ in 1..nodes.len() {
                routing.push(Some(read_classifier(&mut r, dim)?));
            }
            let mut leaf = Vec::with_capacity(nodes.len());
            for n in nodes {
                let count = if n.is_leaf() { n.labels.len() } else { 0 };
                let mut cls = Vec::with_capacity(count);
                for _ in 0..count {
                    cls.push(read_classifier(&mut r, dim)?);
                }
                leaf.push(cls);
            }
            trees.push(TrainedTree::new(tree, routing, leaf).map_err(|e| Error::Corrupt(e.to_string()))?);
        }
        if !r.is_done() {
            return Err(Error::Corrupt("trailing bytes after classifier weights".into()));
        }
        let params = TrainParams { solver, features };
        Model::new(feature_index, tree_config, params, labels, trees).map_err(|e| Error::Corrupt(e.to_string()))
    }
}
