//! Text normalization and hashed word k-shingles.
//!
//! Title and abstract are tokenized separately and joined by a field
//! separator; no k-gram may span the separator, so the shingle set is the
//! union of the per-field k-gram sets. Each k-gram is hashed to 64 bits with
//! xxh3 under [`SHINGLE_HASH_SEED`], which makes shingle values stable across
//! runs and platforms.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::corpus::ManuscriptRecord;

/// Fixed seed for shingle hashing. Changing it invalidates every snapshot.
pub const SHINGLE_HASH_SEED: u64 = 0x6475_7065_7363_616e;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShingleSet {
    pub manuscript_id: String,
    /// Sorted, deduplicated shingle hashes.
    pub shingles: Vec<u64>,
    /// Word tokens across title and abstract, separator excluded.
    pub token_count: usize,
    /// No k-gram could be formed; such records are not indexed.
    pub too_short: bool,
}

impl ShingleSet {
    pub fn from_hashes(manuscript_id: impl Into<String>, hashes: impl IntoIterator<Item = u64>) -> Self {
        let mut shingles: Vec<u64> = hashes.into_iter().collect();
        shingles.sort_unstable();
        shingles.dedup();
        let token_count = shingles.len();
        ShingleSet {
            manuscript_id: manuscript_id.into(),
            too_short: shingles.is_empty(),
            shingles,
            token_count,
        }
    }

    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }

    pub fn contains(&self, shingle: u64) -> bool {
        self.shingles.binary_search(&shingle).is_ok()
    }
}

/// Shingle sets addressable by manuscript id, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShingleStore {
    sets: Vec<ShingleSet>,
    index: HashMap<String, usize>,
}

impl ShingleStore {
    pub fn new(sets: Vec<ShingleSet>) -> Self {
        let index = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (s.manuscript_id.clone(), i))
            .collect();
        ShingleStore { sets, index }
    }

    pub fn get(&self, id: &str) -> Option<&ShingleSet> {
        self.index.get(id).map(|&i| &self.sets[i])
    }

    pub fn sets(&self) -> &[ShingleSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// NFKC-normalizes, lowercases, turns punctuation and symbols into spaces and
/// returns the remaining word tokens.
pub fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .nfkc()
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c.is_alphanumeric() || is_combining_mark(c) {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Hash of one k-gram.
pub fn hash_gram<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut buf = String::new();
    for (i, token) in tokens.iter().enumerate() {
        if i > 0 {
            buf.push(' ');
        }
        buf.push_str(token.as_ref());
    }
    xxh3_64_with_seed(buf.as_bytes(), SHINGLE_HASH_SEED)
}

fn push_grams(tokens: &[String], k: usize, out: &mut Vec<u64>) {
    if tokens.len() >= k {
        out.extend(tokens.windows(k).map(hash_gram));
    }
}

/// Shingles raw title and abstract text.
///
/// # Panics
///
/// Panics if `k` is zero.
pub fn shingle_text(manuscript_id: &str, title: &str, abstract_text: &str, k: usize) -> ShingleSet {
    assert!(k >= 1, "shingle size must be at least 1");
    let title_tokens = normalize(title);
    let abstract_tokens = normalize(abstract_text);
    let mut hashes = Vec::new();
    push_grams(&title_tokens, k, &mut hashes);
    push_grams(&abstract_tokens, k, &mut hashes);
    hashes.sort_unstable();
    hashes.dedup();
    ShingleSet {
        manuscript_id: manuscript_id.to_owned(),
        too_short: hashes.is_empty(),
        shingles: hashes,
        token_count: title_tokens.len() + abstract_tokens.len(),
    }
}

pub fn shingle(record: &ManuscriptRecord, k: usize) -> ShingleSet {
    shingle_text(&record.id, &record.title, &record.r#abstract, k)
}

/// Size of the intersection of two sorted, deduplicated slices.
pub(crate) fn intersection_size(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets give 0.
pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    let inter = intersection_size(&a.shingles, &b.shingles);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
