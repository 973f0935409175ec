use std::collections::HashMap;

use super::Dataset;

pub const PAD: usize = 0;
pub const UNK: usize = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    min_count: usize,
    case_folding: bool,
}

/// Ids are assigned by descending frequency, ties broken lexicographically,
/// after the fixed PAD (0) and UNK (1) entries. A `min_count` of 0 behaves as 1.
pub fn build_vocabulary(dataset: &Dataset, min_count: usize, case_folding: bool) -> Vocabulary {
    let min_count = min_count.max(1);
    let mut counts: HashMap<String, usize> = HashMap::new();
    for s in &dataset.sentences {
        for tok in &s.tokens {
            *counts.entry(fold(tok, case_folding)).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut vocab = Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t), case_folding);
    vocab.min_count = min_count;
    vocab
}

fn fold(token: &str, case_folding: bool) -> String {
    if case_folding {
        token.to_lowercase()
    } else {
        token.to_string()
    }
}

impl Vocabulary {
    /// Builds a vocabulary whose ids 2.. follow `tokens` in order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>, case_folding: bool) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens);
        let ids = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens: all,
            ids,
            min_count: 1,
            case_folding,
        }
    }

    pub fn id(&self, token: &str) -> usize {
        let key = fold(token, self.case_folding);
        match self.ids.get(&key) {
            Some(&id) if id > UNK => id,
            _ => UNK,
        }
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Stored entries (excluding PAD and UNK) in id order.
    pub fn entries(&self) -> &[String] {
        &self.tokens[2..]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn case_folding(&self) -> bool {
        self.case_folding
    }
}
