//! Naive reference implementations and frozen reference values.
#![allow(dead_code)]
// Sample values below may resemble named constants.
#![allow(clippy::approx_constant)]

use mapletag::corpus::tokenize;
use mapletag::{MetadataKind, Model, Paper, SparseVector, Taxonomy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Dense scan over a 0/1 relevance vector indexed by rank.
pub fn precision(ranked: &[String], gold: &BTreeSet<String>, k: usize) -> f64 {
    let rel: Vec<f64> = (0..k)
        .map(|i| match ranked.get(i) {
            Some(l) if gold.contains(l) => 1.0,
            _ => 0.0,
        })
        .collect();
    rel.iter().sum::<f64>() / k as f64
}

pub fn ndcg(ranked: &[String], gold: &BTreeSet<String>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for i in 0..k {
        if ranked.get(i).is_some_and(|l| gold.contains(l)) {
            dcg += 1.0 / (i as f64 + 2.0).log2();
        }
    }
    let mut idcg = 0.0;
    for i in 0..k.min(gold.len()) {
        idcg += 1.0 / (i as f64 + 2.0).log2();
    }
    dcg / idcg
}

pub fn layer_precision(
    ranked: &[String],
    gold: &BTreeSet<String>,
    taxonomy: &Taxonomy,
    layer: u32,
    k: usize,
) -> Option<f64> {
    let in_layer = |l: &String| taxonomy.layer(l) == Some(layer);
    let g: BTreeSet<String> = gold.iter().filter(|l| in_layer(l)).cloned().collect();
    if g.is_empty() {
        return None;
    }
    let r: Vec<String> = ranked.iter().filter(|l| in_layer(l)).cloned().collect();
    Some(precision(&r, &g, k))
}

/// Random (ranking, gold, k) over the labels of `label_ids`.
pub fn random_fixture(rng: &mut ChaCha8Rng, label_ids: &[String]) -> (Vec<String>, BTreeSet<String>, usize) {
    let n = label_ids.len();
    let len = rng.gen_range(0..=n.min(15));
    let ranked = rand::seq::index::sample(rng, n, len)
        .into_iter()
        .map(|i| label_ids[i].clone())
        .collect();
    let g = rng.gen_range(1..=n.min(6));
    let gold = rand::seq::index::sample(rng, n, g)
        .into_iter()
        .map(|i| label_ids[i].clone())
        .collect();
    (ranked, gold, rng.gen_range(1..=10))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// (a, b, t, p) from an independent statistics package: Welch's two-sided
/// test of b against a.
pub const WELCH_REFERENCE: [(&[f64], &[f64], f64, f64); 20] = [
    (
        &[0.6297, 0.6315, 0.5752, 0.6022],
        &[0.5877, 0.5684, 0.5947, 0.5895, 0.5569, 0.5861],
        -1.9964752922310187,
        0.11277122318842311,
    ),
    (
        &[0.6723, 0.6622],
        &[0.6376, 0.6445, 0.6466, 0.6462],
        -4.303808730040365,
        0.09433936628805495,
    ),
    (
        &[0.4171, 0.4186, 0.4148, 0.414, 0.4181, 0.407, 0.4081, 0.3984],
        &[0.419, 0.4036],
        -0.08808449033653849,
        0.9420432727974801,
    ),
    (
        &[0.6813, 0.6934],
        &[0.6688, 0.6658, 0.6684, 0.6686],
        -3.1932838784885242,
        0.18787280763754718,
    ),
    (
        &[0.6708, 0.6762, 0.7417],
        &[0.7022, 0.6979, 0.6902, 0.695, 0.6969, 0.698, 0.6967, 0.6944],
        0.007851544603269485,
        0.994444607067765,
    ),
    (
        &[0.437, 0.4275, 0.4525],
        &[0.4764, 0.4537, 0.4799, 0.4657, 0.4996, 0.4743, 0.4459, 0.4708],
        3.40974344156003,
        0.020284772147281263,
    ),
    (
        &[0.5006, 0.4781, 0.5216],
        &[0.5567, 0.505, 0.529, 0.5361],
        1.9179303296970311,
        0.12109786680421279,
    ),
    (
        &[0.5241, 0.5027, 0.5603, 0.6243, 0.4864, 0.5262],
        &[0.5066, 0.5263, 0.5397],
        -0.5882134249316163,
        0.5757519941916467,
    ),
    (
        &[0.739, 0.7187, 0.7238, 0.7273, 0.7265, 0.7387, 0.7192],
        &[0.7287, 0.748, 0.7175, 0.7073, 0.7602],
        0.46465414215278933,
        0.6622654809303199,
    ),
    (
        &[0.7777, 0.8081, 0.7364],
        &[0.7683, 0.7794, 0.752, 0.7283, 0.7285, 0.7458, 0.7134],
        -1.2815518150443814,
        0.29675224656097016,
    ),
    (
        &[0.8002, 0.7798, 0.7908, 0.7551],
        &[0.7941, 0.8726],
        1.2828281843146698,
        0.4031982765602647,
    ),
    (
        &[0.7578, 0.7632, 0.7508, 0.7712],
        &[0.7463, 0.7587],
        -1.0925874568573677,
        0.3866647514814352,
    ),
    (
        &[0.6568, 0.6615, 0.6478, 0.662],
        &[0.6922, 0.688],
        8.473170831232295,
        0.0011026460114614868,
    ),
    (
        &[0.5757, 0.5427, 0.5834, 0.581],
        &[0.5927, 0.5883, 0.5871, 0.5855, 0.5989, 0.6017, 0.5977],
        2.2945064422707744,
        0.09520949231300525,
    ),
    (
        &[0.6961, 0.6919, 0.6861, 0.6874],
        &[0.6804, 0.6856, 0.6903, 0.6906, 0.676, 0.6828],
        -1.8672363037468953,
        0.1008112233650775,
    ),
    (
        &[0.5235, 0.5156, 0.4962],
        &[0.5549, 0.543, 0.5494, 0.5432, 0.5443, 0.5475],
        4.237831035768594,
        0.042752157860013434,
    ),
    (
        &[0.3567, 0.3004, 0.3367, 0.3504, 0.3178, 0.2987, 0.3416],
        &[0.3387, 0.3384, 0.3374, 0.3323, 0.3393, 0.3387, 0.3277, 0.3415],
        0.8710886497683226,
        0.41524876882188805,
    ),
    (
        &[0.4722, 0.4796, 0.4672, 0.48, 0.4867],
        &[0.4816, 0.4798, 0.5039, 0.4705, 0.4536],
        0.08359100893637222,
        0.9364318368515561,
    ),
    (
        &[0.2989, 0.3214, 0.3043, 0.297],
        &[0.263, 0.2936, 0.2815, 0.2914, 0.2284, 0.2417, 0.3035],
        -2.77746714235407,
        0.02282718006347548,
    ),
    (
        &[0.7714, 0.7526, 0.7713],
        &[0.7479, 0.7268, 0.7517, 0.7533, 0.7726, 0.7828],
        -0.9085533738485838,
        0.3949729475942098,
    ),
];

/// Dense evaluation of the tf-idf and bag-of-metadata formulas, independent of
/// the feature index: returns the feature names in index order and the
/// weights of every paper.
pub fn dense_features(
    train: &[Paper],
    kinds: &BTreeSet<MetadataKind>,
    min_df: usize,
    normalize: bool,
) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = train.len() as f64;
    let mut word_df: BTreeMap<String, usize> = BTreeMap::new();
    for p in train {
        for w in tokenize(&p.text()).into_iter().collect::<BTreeSet<_>>() {
            *word_df.entry(w).or_default() += 1;
        }
    }
    let mut meta_df: BTreeMap<(MetadataKind, String), usize> = BTreeMap::new();
    for p in train {
        for &k in kinds {
            for m in p.metadata(k).iter().collect::<BTreeSet<_>>() {
                *meta_df.entry((k, m.clone())).or_default() += 1;
            }
        }
    }
    let words: Vec<(String, usize)> = word_df.into_iter().filter(|&(_, df)| df >= min_df).collect();
    let meta: Vec<((MetadataKind, String), usize)> = meta_df.into_iter().filter(|&(_, df)| df >= min_df).collect();
    let names = words
        .iter()
        .map(|(w, _)| w.clone())
        .chain(meta.iter().map(|((k, m), _)| format!("{k}:{m}")))
        .collect();
    let rows = train
        .iter()
        .map(|p| {
            let tokens = tokenize(&p.text());
            let mut row: Vec<f64> = words
                .iter()
                .map(|(w, df)| tokens.iter().filter(|t| *t == w).count() as f64 * (n / *df as f64).ln())
                .collect();
            row.extend(meta.iter().map(|((k, m), df)| {
                let present = p.metadata(*k).contains(m);
                if present {
                    (n / *df as f64).ln()
                } else {
                    0.0
                }
            }));
            if normalize {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
            row
        })
        .collect();
    (names, rows)
}

/// Every label's score with no pruning: path products from the root, averaged
/// over trees, ordered by score then label.
pub fn exhaustive(model: &Model<f64>, x: &SparseVector<f64>) -> Vec<(u32, f64)> {
    let mut totals = vec![0.0; model.labels().len()];
    for tree in model.trees() {
        let nodes = tree.tree().nodes();
        let mut stack = vec![(0usize, 1.0)];
        while let Some((n, path)) = stack.pop() {
            match nodes[n].children {
                Some(children) => {
                    for c in children {
                        stack.push((c, path * tree.routing_classifier(c).unwrap().probability(x)));
                    }
                }
                None => {
                    for (&l, cls) in nodes[n].labels.iter().zip(tree.leaf_classifiers(n)) {
                        totals[l as usize] += path * cls.probability(x);
                    }
                }
            }
        }
    }
    let n = model.trees().len() as f64;
    let mut ranked: Vec<(u32, f64)> = totals.into_iter().enumerate().map(|(l, s)| (l as u32, s / n)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}
