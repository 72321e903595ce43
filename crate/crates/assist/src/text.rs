//! Token-level helpers shared by the stub provider and the drift policy.

use std::collections::{BTreeSet, HashMap};

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// |A ∩ B| / |A ∪ B| over token sets. Two token-free texts count as identical.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let (a, b) = (token_set(a), token_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more",
    "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "s", "t", "don", "use", "used", "using", "much", "many", "may", "might", "one",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Non-stopword tokens ordered by descending frequency, ties broken by first occurrence.
pub fn frequent_terms(text: &str) -> Vec<String> {
    let tokens: Vec<String> = tokenize(text).into_iter().filter(|t| !is_stopword(t) && t.chars().count() > 1).collect();
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (i, t) in tokens.iter().enumerate() {
        first_seen.entry(t).or_insert(i);
        *counts.entry(t).or_default() += 1;
    }
    let mut terms: Vec<&str> = counts.keys().copied().collect();
    terms.sort_by(|a, b| counts[b].cmp(&counts[a]).then(first_seen[a].cmp(&first_seen[b])));
    terms.into_iter().map(str::to_owned).collect()
}
