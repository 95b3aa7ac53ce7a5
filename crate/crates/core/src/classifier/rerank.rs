use super::{sort_ranked, Prediction};
use crate::corpus::{tokenize, Paper, Taxonomy};
use crate::scalar::Real;
use log::warn;

/// True when the tokens of `name` appear contiguously in `text_tokens`.
pub fn name_occurs(name: &str, text_tokens: &[String]) -> bool {
    let needle = tokenize(name);
    !needle.is_empty() && text_tokens.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Adds 1 to the score of every label with a name occurring in the paper's
/// title or abstract, then re-sorts.
///
/// A label matches when any of its names (canonical or entry term) occurs as a
/// contiguous token sequence. Labels missing from the taxonomy never match.
pub fn lexical_rerank<F: Real>(prediction: &Prediction<F>, paper: &Paper, taxonomy: &Taxonomy) -> Prediction<F> {
    let text = tokenize(&paper.text());
    let mut ranked: Vec<(String, F)> = prediction
        .ranked
        .iter()
        .map(|(label, score)| {
            let matched = match taxonomy.names(label) {
                Some(names) => names.iter().any(|n| name_occurs(n, &text)),
                None => {
                    warn!("label {label:?} is not in the taxonomy; treated as unmatched");
                    false
                }
            };
            let bonus = if matched { F::one() } else { F::zero() };
            (label.clone(), *score + bonus)
        })
        .collect();
    sort_ranked(&mut ranked);
    Prediction {
        paper_id: prediction.paper_id.clone(),
        ranked,
    }
}
