//! Hashed unigram + bigram features.

use serde::{Deserialize, Serialize};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(i, v)| (*i as usize, *v))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Builds from unsorted (index, value) pairs, summing duplicates and
    /// dropping exact zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseVector::default();
        for (i, v) in pairs {
            if out.indices.last() == Some(&i) {
                *out.values.last_mut().unwrap() += v;
            } else {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        let (indices, values) = out
            .indices
            .into_iter()
            .zip(out.values)
            .filter(|(_, v)| *v != 0.0)
            .unzip();
        SparseVector { indices, values }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercases, splits on runs of non-alphanumeric characters and keeps the
/// first `max_tokens` tokens.
pub fn tokenize(text: &str, max_tokens: usize) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(max_tokens)
        .map(str::to_string)
        .collect()
}

fn bucket(key: &str, dim: usize) -> (u32, f64) {
    let h = fnv1a(key.as_bytes());
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    ((h % dim as u64) as u32, sign)
}

/// Signed hashed counts of unigrams and bigrams, before normalization.
/// Bigram keys are `"a b"`; tokens never contain spaces, so they cannot
/// collide with unigram keys.
pub fn hashed_counts(tokens: &[String], dim: usize) -> SparseVector {
    let mut pairs = Vec::with_capacity(tokens.len() * 2);
    for t in tokens {
        pairs.push(bucket(t, dim));
    }
    for w in tokens.windows(2) {
        pairs.push(bucket(&format!("{} {}", w[0], w[1]), dim));
    }
    SparseVector::from_pairs(pairs)
}

/// L2-normalized hashed features; empty text gives the zero vector.
pub fn featurize(text: &str, dim: usize, max_tokens: usize) -> SparseVector {
    let mut v = hashed_counts(&tokenize(text, max_tokens), dim);
    let norm = v.norm();
    if norm > 0.0 {
        v.values.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
