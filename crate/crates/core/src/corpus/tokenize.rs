/// Splits text into lowercase alphanumeric tokens of at least two characters.
///
/// No stemming and no stopword removal. The same tokenizer is used for
/// vocabulary building, vectorization and label-name matching.
pub fn tokenize(text: &str) -> Vec<String> {
    tokens(text).collect()
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
}
