//! Near-duplicate document removal with MinHash signatures and banded LSH.
//!
//! Each document is reduced to a set of hashed word (or character) n-grams.
//! The `i`-th signature slot holds `min_x h_i(x)` with
//! `h_i(x) = (a_i * x + b_i) mod p`, `p = 2^61 - 1`, and `(a_i, b_i)` drawn
//! from a ChaCha stream keyed by the seed. Signatures are cut into `b` bands of
//! `r` rows; documents sharing any band bucket become candidate pairs, which
//! are confirmed against the estimated Jaccard threshold and collapsed with
//! union-find.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hasher;

use fnv::FnvHasher;
use petgraph::unionfind::UnionFind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

/// The Mersenne prime `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Error, PartialEq)]
pub enum DedupError {
    #[error("shingle width must be >= 1")]
    ZeroWidth,
    #[error("signature length must be >= 1")]
    ZeroLength,
    #[error("cannot sign an empty shingle set")]
    EmptyShingles,
    #[error("signatures differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("signatures were built with different seeds ({0} vs {1})")]
    SeedMismatch(u64, u64),
    #[error("bands * rows = {bands} * {rows} does not equal signature length {k}")]
    BandMismatch { bands: usize, rows: usize, k: usize },
    #[error("jaccard threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShingleUnit {
    #[default]
    Word,
    Char,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub shingles: HashSet<u64>,
    pub n: usize,
}

impl ShingleSet {
    /// Exact Jaccard similarity by set arithmetic.
    pub fn jaccard(&self, other: &ShingleSet) -> f64 {
        let inter = self.shingles.intersection(&other.shingles).count();
        let union = self.shingles.len() + other.shingles.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Hashes every window of `n` consecutive tokens. Texts shorter than `n`
/// tokens yield a single shingle covering the whole text.
pub fn shingle(text: &str, n: usize, unit: ShingleUnit) -> ShingleSet {
    assert!(n >= 1, "shingle width must be >= 1");
    let (tokens, sep): (Vec<&str>, &str) = match unit {
        ShingleUnit::Word => (text.split_whitespace().collect(), " "),
        ShingleUnit::Char => (
            text.char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
            "",
        ),
    };
    let shingles = if tokens.len() < n {
        std::iter::once(fnv64(tokens.join(sep).as_bytes())).collect()
    } else {
        tokens.windows(n).map(|w| fnv64(w.join(sep).as_bytes())).collect()
    };
    ShingleSet { shingles, n }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub seed: u64,
}

impl MinHashSignature {
    pub fn k(&self) -> usize {
        self.values.len()
    }
}

/// A family of `k` seeded universal hash functions.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
    seed: u64,
}

impl MinHasher {
    pub fn new(k: usize, seed: u64) -> Result<Self, DedupError> {
        if k == 0 {
            return Err(DedupError::ZeroLength);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..k)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        Ok(MinHasher { coeffs, seed })
    }

    pub fn sign(&self, set: &ShingleSet) -> Result<MinHashSignature, DedupError> {
        if set.shingles.is_empty() {
            return Err(DedupError::EmptyShingles);
        }
        let p = MERSENNE_61 as u128;
        let xs: Vec<u128> = set.shingles.iter().map(|&x| (x % MERSENNE_61) as u128).collect();
        let values = self
            .coeffs
            .iter()
            .map(|&(a, b)| {
                xs.iter()
                    .map(|&x| ((a as u128 * x + b as u128) % p) as u64)
                    .min()
                    .expect("non-empty")
            })
            .collect();
        Ok(MinHashSignature { values, seed: self.seed })
    }
}

pub fn signature(set: &ShingleSet, k: usize, seed: u64) -> Result<MinHashSignature, DedupError> {
    MinHasher::new(k, seed)?.sign(set)
}

/// Fraction of signature positions that agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.k() != b.k() {
        return Err(DedupError::LengthMismatch(a.k(), b.k()));
    }
    if a.seed != b.seed {
        return Err(DedupError::SeedMismatch(a.seed, b.seed));
    }
    if a.k() == 0 {
        return Err(DedupError::ZeroLength);
    }
    let eq = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(eq as f64 / a.k() as f64)
}

/// Banded LSH buckets keyed by `(band index, band hash)`.
#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    buckets: HashMap<(usize, u64), Vec<usize>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize) -> Self {
        LshIndex { bands, rows, buckets: HashMap::new() }
    }

    fn band_hashes<'a>(&self, sig: &'a MinHashSignature) -> impl Iterator<Item = (usize, u64)> + 'a {
        let rows = self.rows;
        sig.values.chunks(rows).enumerate().map(|(band, chunk)| {
            let mut h = FnvHasher::default();
            for v in chunk {
                h.write_u64(*v);
            }
            (band, h.finish())
        })
    }

    fn check(&self, sig: &MinHashSignature) -> Result<(), DedupError> {
        if self.bands * self.rows != sig.k() {
            return Err(DedupError::BandMismatch { bands: self.bands, rows: self.rows, k: sig.k() });
        }
        Ok(())
    }

    /// Adds `doc` to one bucket per band.
    pub fn insert(&mut self, doc: usize, sig: &MinHashSignature) -> Result<(), DedupError> {
        self.check(sig)?;
        let keys: Vec<_> = self.band_hashes(sig).collect();
        for key in keys {
            self.buckets.entry(key).or_default().push(doc);
        }
        Ok(())
    }

    /// Documents sharing at least one bucket with `sig`.
    pub fn query(&self, sig: &MinHashSignature) -> Result<BTreeSet<usize>, DedupError> {
        self.check(sig)?;
        Ok(self
            .band_hashes(sig)
            .filter_map(|key| self.buckets.get(&key))
            .flatten()
            .copied()
            .collect())
    }

    /// All unordered pairs `(i, j)`, `i < j`, that share a bucket.
    pub fn candidate_pairs(&self) -> BTreeSet<(usize, usize)> {
        let mut pairs = BTreeSet::new();
        for members in self.buckets.values() {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    if i != j {
                        pairs.insert((i.min(j), i.max(j)));
                    }
                }
            }
        }
        pairs
    }

    /// Number of buckets containing `doc`.
    pub fn bucket_count(&self, doc: usize) -> usize {
        self.buckets.values().filter(|m| m.contains(&doc)).count()
    }
}

/// Probability that two signatures with per-slot agreement `s` share a band.
pub fn band_collision_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DedupConfig {
    pub shingle_n: usize,
    pub unit: ShingleUnit,
    pub k: usize,
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
    pub seed: u64,
    /// Score used first when choosing a cluster representative.
    pub quality_key: String,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            shingle_n: 5,
            unit: ShingleUnit::Word,
            k: 128,
            bands: 16,
            rows: 8,
            threshold: 0.8,
            seed: 0,
            quality_key: "composite_quality".to_string(),
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.shingle_n == 0 {
            return Err(DedupError::ZeroWidth);
        }
        if self.k == 0 {
            return Err(DedupError::ZeroLength);
        }
        if self.bands * self.rows != self.k {
            return Err(DedupError::BandMismatch { bands: self.bands, rows: self.rows, k: self.k });
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(DedupError::InvalidThreshold(self.threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateDrop {
    pub dropped_id: String,
    pub kept_id: String,
    pub estimated_jaccard: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    pub kept: Vec<Document>,
    pub dropped: Vec<(Document, DuplicateDrop)>,
}

impl DedupOutcome {
    pub fn report(&self) -> Vec<&DuplicateDrop> {
        self.dropped.iter().map(|(_, d)| d).collect()
    }
}

/// Representative preference: higher quality score, then longer text, then smaller id.
fn prefer(a: &Document, b: &Document, key: &str) -> Ordering {
    let qa = a.scores.get(key).copied();
    let qb = b.scores.get(key).copied();
    let by_quality = match (qa, qb) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Greater,
        (None, Some(_)) => Ordering::Less,
        (None, None) => Ordering::Equal,
    };
    by_quality
        .then_with(|| a.text.chars().count().cmp(&b.text.chars().count()))
        .then_with(|| b.id.cmp(&a.id))
}

/// Removes near-duplicates, keeping one representative per cluster.
///
/// Kept documents retain their input order. Each dropped document reports the
/// representative it collapsed into and their estimated Jaccard similarity.
pub fn dedup(docs: Vec<Document>, config: &DedupConfig) -> Result<DedupOutcome, DedupError> {
    config.validate()?;
    let hasher = MinHasher::new(config.k, config.seed)?;
    let sigs = docs
        .par_iter()
        .map(|d| hasher.sign(&shingle(&d.text, config.shingle_n, config.unit)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut index = LshIndex::new(config.bands, config.rows);
    for (i, s) in sigs.iter().enumerate() {
        index.insert(i, s)?;
    }

    let mut clusters = UnionFind::<usize>::new(docs.len());
    for (i, j) in index.candidate_pairs() {
        if estimate_jaccard(&sigs[i], &sigs[j])? >= config.threshold {
            clusters.union(i, j);
        }
    }

    let mut rep: HashMap<usize, usize> = HashMap::new();
    for i in 0..docs.len() {
        let root = clusters.find(i);
        match rep.get(&root) {
            Some(&cur) if prefer(&docs[cur], &docs[i], &config.quality_key) != Ordering::Less => {}
            _ => {
                rep.insert(root, i);
            }
        }
    }

    let reps: Vec<usize> = (0..docs.len()).map(|i| rep[&clusters.find(i)]).collect();
    let ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    let mut out = DedupOutcome::default();
    for (i, doc) in docs.into_iter().enumerate() {
        let r = reps[i];
        if r == i {
            out.kept.push(doc);
        } else {
            let drop = DuplicateDrop {
                dropped_id: doc.id.clone(),
                kept_id: ids[r].clone(),
                estimated_jaccard: estimate_jaccard(&sigs[i], &sigs[r])?,
            };
            out.dropped.push((doc, drop));
        }
    }
    Ok(out)
}
