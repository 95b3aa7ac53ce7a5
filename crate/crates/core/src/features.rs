//! tf-idf bag-of-words, bag-of-metadata, and their concatenation.
//!
//! A word `w` in paper `p` gets `tf(w, p) * idf(w)` where `tf` is the raw count
//! in title + abstract. A metadata instance `m` gets `1 * idf(m)` when `p`
//! carries it (metadata tf is an indicator). `idf(f) = ln(|D| / df(f))` over the
//! training papers `D`.

use crate::corpus::{tokens, FeatureIndex, Paper};
use crate::error::{Error, Result};
use crate::scalar::Real;
use std::fmt::Write as _;

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<F> {
    indices: Vec<u32>,
    values: Vec<F>,
    dim: usize,
}

impl<F: Real> SparseVector<F> {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    /// Checked constructor: indices strictly increasing and below `dim`,
    /// weights finite and nonzero.
    pub fn new(dim: usize, entries: Vec<(u32, F)>) -> Result<Self> {
        let mut prev: Option<u32> = None;
        for &(i, v) in &entries {
            if prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidInput("sparse indices must be strictly increasing".into()));
            }
            if i as usize >= dim {
                return Err(Error::InvalidInput(format!("sparse index {i} out of dimension {dim}")));
            }
            if !v.is_finite() || v == F::zero() {
                return Err(Error::InvalidInput(format!("invalid sparse weight {v} at {i}")));
            }
            prev = Some(i);
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(SparseVector { indices, values, dim })
    }

    /// Sorts entries, sums repeated indices and drops zeros.
    ///
    /// Panics if an index is out of range.
    pub fn from_unordered(dim: usize, mut entries: Vec<(u32, F)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<F> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            assert!((i as usize) < dim, "sparse index {i} out of dimension {dim}");
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = SparseVector { indices, values, dim };
        out.retain(|_, v| v != F::zero());
        out
    }

    pub(crate) fn from_parts_unchecked(dim: usize, indices: Vec<u32>, values: Vec<F>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SparseVector { indices, values, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, F)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn get(&self, index: usize) -> F {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => F::zero(),
        }
    }

    pub fn norm(&self) -> F {
        self.values.iter().map(|&v| v * v).sum::<F>().sqrt()
    }

    pub fn scale(&mut self, factor: F) {
        for v in &mut self.values {
            *v *= factor;
        }
        self.retain(|_, v| v != F::zero());
    }

    /// Scales to unit Euclidean norm; the zero vector stays zero.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > F::zero() {
            for v in &mut self.values {
                *v /= n;
            }
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn retain(&mut self, mut keep: impl FnMut(usize, F) -> bool) {
        let mut w = 0;
        for r in 0..self.indices.len() {
            if keep(self.indices[r] as usize, self.values[r]) {
                self.indices[w] = self.indices[r];
                self.values[w] = self.values[r];
                w += 1;
            }
        }
        self.indices.truncate(w);
        self.values.truncate(w);
    }

    /// Dot product with a dense vector of at least `self.dim()` entries.
    pub fn dot_dense(&self, dense: &[F]) -> F {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn dot(&self, other: &SparseVector<F>) -> F {
        let (mut a, mut b) = (0, 0);
        let mut acc = F::zero();
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Adds `factor * self` into a dense accumulator.
    pub fn axpy_into(&self, factor: F, dense: &mut [F]) {
        for (i, v) in self.iter() {
            dense[i] += factor * v;
        }
    }

    pub fn to_dense(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// `self || other`: other's indices shifted by `self.dim()`.
    pub fn concat(&self, other: &SparseVector<F>) -> Self {
        let offset = self.dim as u32;
        let mut indices = self.indices.clone();
        indices.extend(other.indices.iter().map(|&i| i + offset));
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        SparseVector {
            indices,
            values,
            dim: self.dim + other.dim,
        }
    }

    /// Same entries in a larger space.
    pub fn padded(&self, dim: usize) -> Self {
        assert!(dim >= self.dim);
        SparseVector {
            indices: self.indices.clone(),
            values: self.values.clone(),
            dim,
        }
    }
}

/// How paper vectors are assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Scale the concatenated vector to unit norm.
    pub normalize: bool,
    pub text_weight: f64,
    pub metadata_weight: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            normalize: true,
            text_weight: 1.0,
            metadata_weight: 1.0,
        }
    }
}

/// `ln(|D| / df)` for an indexed feature.
pub fn idf<F: Real>(feature: usize, index: &FeatureIndex) -> Result<F> {
    let df = index
        .document_frequency(feature)
        .ok_or(Error::UnindexedFeature(feature))?;
    Ok(idf_value(index.corpus_size(), df))
}

fn idf_value<F: Real>(corpus_size: u32, df: u32) -> F {
    debug_assert!(df >= 1 && df <= corpus_size);
    F::from_f64_lossy((corpus_size as f64 / df as f64).ln())
}

/// Bag-of-words block over `index.num_words()` dimensions.
///
/// Words outside the vocabulary are ignored.
pub fn vectorize_text<F: Real>(paper: &Paper, index: &FeatureIndex) -> SparseVector<F> {
    let mut ids: Vec<u32> = tokens(&paper.title)
        .chain(tokens(&paper.abstract_text))
        .filter_map(|t| index.word_id(&t))
        .collect();
    ids.sort_unstable();
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut start = 0;
    while start < ids.len() {
        let id = ids[start];
        let end = start + ids[start..].iter().take_while(|&&x| x == id).count();
        let tf = (end - start) as f64;
        let df = index.document_frequency(id as usize).expect("word ids are indexed");
        let w = F::from_f64_lossy(tf) * idf_value::<F>(index.corpus_size(), df);
        if w != F::zero() {
            indices.push(id);
            values.push(w);
        }
        start = end;
    }
    SparseVector::from_parts_unchecked(index.num_words(), indices, values)
}

/// Bag-of-metadata block over `index.num_metadata()` dimensions; slot 0 is the
/// first indexed metadata instance.
pub fn vectorize_metadata<F: Real>(paper: &Paper, index: &FeatureIndex) -> SparseVector<F> {
    let offset = index.num_words() as u32;
    let mut ids: Vec<u32> = Vec::new();
    for &kind in index.kinds() {
        ids.extend(paper.metadata(kind).iter().filter_map(|m| index.metadata_id(kind, m)));
    }
    ids.sort_unstable();
    ids.dedup();
    let mut indices = Vec::with_capacity(ids.len());
    let mut values = Vec::with_capacity(ids.len());
    for id in ids {
        let df = index.document_frequency(id as usize).expect("metadata ids are indexed");
        let w = idf_value::<F>(index.corpus_size(), df);
        if w != F::zero() {
            indices.push(id - offset);
            values.push(w);
        }
    }
    SparseVector::from_parts_unchecked(index.num_metadata(), indices, values)
}

/// Full feature vector: text block, then metadata block, block weights applied,
/// optionally scaled to unit norm.
pub fn featurize<F: Real>(paper: &Paper, index: &FeatureIndex, config: &FeatureConfig) -> SparseVector<F> {
    let mut text = vectorize_text::<F>(paper, index);
    let mut meta = vectorize_metadata::<F>(paper, index);
    if config.text_weight != 1.0 {
        text.scale(F::from_f64_lossy(config.text_weight));
    }
    if config.metadata_weight != 1.0 {
        meta.scale(F::from_f64_lossy(config.metadata_weight));
    }
    let mut v = text.concat(&meta);
    if config.normalize {
        v.normalize();
    }
    v
}

/// Debug line `paper_id<TAB>index:weight,...` with six decimals.
pub fn format_vector_line<F: Real>(paper_id: &str, v: &SparseVector<F>) -> String {
    let mut s = String::with_capacity(paper_id.len() + 16 * v.nnz());
    s.push_str(paper_id);
    s.push('\t');
    for (n, (i, w)) in v.iter().enumerate() {
        if n > 0 {
            s.push(',');
        }
        write!(s, "{i}:{:.6}", w.as_f64()).unwrap();
    }
    s
}
