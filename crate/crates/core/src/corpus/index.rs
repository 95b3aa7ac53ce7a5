use super::{tokens, MetadataKind, Paper};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap, HashSet};

/// Vocabulary of words and metadata instances with training-set document
/// frequencies.
///
/// Feature ids are contiguous from 0. Words come first, in lexicographic order,
/// followed by metadata instances ordered by (kind, id). This is the layout of
/// the concatenated text + metadata vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndex {
    words: Vec<String>,
    metadata: Vec<(MetadataKind, String)>,
    word_ids: HashMap<String, u32>,
    metadata_ids: HashMap<(MetadataKind, String), u32>,
    document_frequencies: Vec<u32>,
    corpus_size: u32,
    min_df: u32,
    kinds: BTreeSet<MetadataKind>,
}

/// Indexes words and the selected metadata kinds seen in at least `min_df`
/// training papers.
pub fn build_feature_index(train: &[Paper], min_df: u32, kinds: &BTreeSet<MetadataKind>) -> Result<FeatureIndex> {
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a feature index from zero papers".into(),
        ));
    }
    if min_df < 1 {
        return Err(Error::InvalidInput("min_df must be at least 1".into()));
    }
    let mut word_df: HashMap<String, u32> = HashMap::new();
    let mut meta_df: HashMap<(MetadataKind, String), u32> = HashMap::new();
    let mut seen: HashSet<String> = HashSet::new();
    for paper in train {
        seen.clear();
        for tok in tokens(&paper.title).chain(tokens(&paper.abstract_text)) {
            if !seen.contains(&tok) {
                *word_df.entry(tok.clone()).or_default() += 1;
                seen.insert(tok);
            }
        }
        for &kind in kinds {
            // loader already dropped duplicates within a list
            for m in paper.metadata(kind) {
                *meta_df.entry((kind, m.clone())).or_default() += 1;
            }
        }
    }
    let mut words: Vec<(String, u32)> = word_df.into_iter().filter(|&(_, df)| df >= min_df).collect();
    if words.is_empty() {
        return Err(Error::EmptyVocabulary { min_df });
    }
    words.sort_unstable();
    let mut metadata: Vec<((MetadataKind, String), u32)> =
        meta_df.into_iter().filter(|&(_, df)| df >= min_df).collect();
    metadata.sort_unstable();

    let mut document_frequencies = Vec::with_capacity(words.len() + metadata.len());
    let mut word_names = Vec::with_capacity(words.len());
    for (w, df) in words {
        word_names.push(w);
        document_frequencies.push(df);
    }
    let mut meta_names = Vec::with_capacity(metadata.len());
    for (m, df) in metadata {
        meta_names.push(m);
        document_frequencies.push(df);
    }
    Ok(FeatureIndex::assemble(
        word_names,
        meta_names,
        document_frequencies,
        train.len() as u32,
        min_df,
        kinds.clone(),
    ))
}

impl FeatureIndex {
    fn assemble(
        words: Vec<String>,
        metadata: Vec<(MetadataKind, String)>,
        document_frequencies: Vec<u32>,
        corpus_size: u32,
        min_df: u32,
        kinds: BTreeSet<MetadataKind>,
    ) -> Self {
        let word_ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let offset = words.len() as u32;
        let metadata_ids = metadata
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), offset + i as u32))
            .collect();
        FeatureIndex {
            words,
            metadata,
            word_ids,
            metadata_ids,
            document_frequencies,
            corpus_size,
            min_df,
            kinds,
        }
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_metadata(&self) -> usize {
        self.metadata.len()
    }

    /// Total feature count, words plus metadata.
    pub fn dimension(&self) -> usize {
        self.document_frequencies.len()
    }

    /// Number of training papers the frequencies were counted over.
    pub fn corpus_size(&self) -> u32 {
        self.corpus_size
    }

    pub fn min_df(&self) -> u32 {
        self.min_df
    }

    pub fn kinds(&self) -> &BTreeSet<MetadataKind> {
        &self.kinds
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.word_ids.get(word).copied()
    }

    pub fn metadata_id(&self, kind: MetadataKind, id: &str) -> Option<u32> {
        // avoid allocating the key for the common miss
        if !self.kinds.contains(&kind) {
            return None;
        }
        self.metadata_ids.get(&(kind, id.to_owned())).copied()
    }

    pub fn document_frequency(&self, feature: usize) -> Option<u32> {
        self.document_frequencies.get(feature).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn metadata(&self) -> &[(MetadataKind, String)] {
        &self.metadata
    }

    /// Number of indexed instances of one metadata kind.
    pub fn metadata_count(&self, kind: MetadataKind) -> usize {
        self.metadata.iter().filter(|(k, _)| *k == kind).count()
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u32(self.corpus_size);
        w.u32(self.min_df);
        w.len(self.kinds.len());
        for k in &self.kinds {
            w.u8(k.code());
        }
        w.len(self.words.len());
        for word in &self.words {
            w.str(word);
        }
        w.len(self.metadata.len());
        for (kind, id) in &self.metadata {
            w.u8(kind.code());
            w.str(id);
        }
        for &df in &self.document_frequencies {
            w.u32(df);
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let corpus_size = r.u32()?;
        let min_df = r.u32()?;
        let n_kinds = r.len()?;
        let mut kinds = BTreeSet::new();
        for _ in 0..n_kinds {
            kinds.insert(kind_from_code(r.u8()?)?);
        }
        let n_words = r.len()?;
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            words.push(r.str()?);
        }
        let n_meta = r.len()?;
        let mut metadata = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            let kind = kind_from_code(r.u8()?)?;
            metadata.push((kind, r.str()?));
        }
        let mut document_frequencies = Vec::with_capacity(n_words + n_meta);
        for _ in 0..n_words + n_meta {
            let df = r.u32()?;
            if df == 0 || df > corpus_size {
                return Err(Error::Corrupt(format!("document frequency {df} out of range")));
            }
            document_frequencies.push(df);
        }
        Ok(FeatureIndex::assemble(
            words,
            metadata,
            document_frequencies,
            corpus_size,
            min_df,
            kinds,
        ))
    }

    /// SHA-256 of the encoded index, hex.
    pub fn fingerprint(&self) -> String {
        let mut w = Writer::default();
        self.encode(&mut w);
        hex(&Sha256::digest(&w.buf))
    }
}

fn kind_from_code(code: u8) -> Result<MetadataKind> {
    MetadataKind::from_code(code).ok_or_else(|| Error::Corrupt(format!("unknown metadata kind code {code}")))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
