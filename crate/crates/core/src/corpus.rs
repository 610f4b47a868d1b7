//! Corpus ingestion: vocabulary, documents, negative sampling and context
//! windows.
//!
//! A corpus file holds one document per line with tokens separated by single
//! ASCII spaces. Multi-word phrases arrive pre-joined (`los_angeles`).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Exponent applied to unigram counts when drawing negatives.
pub const NEGATIVE_POWER: f64 = 0.75;

const MAX_NEGATIVE_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, TokenId>,
    tokens: Vec<String>,
    counts: Vec<u64>,
    total: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from whitespace-tokenized lines. Ids are assigned by
    /// descending count, ties broken lexicographically.
    pub fn from_lines<I, S>(lines: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut raw: HashMap<String, u64> = HashMap::new();
        for line in lines {
            for tok in tokens(line.as_ref()) {
                match raw.get_mut(tok) {
                    Some(c) => *c += 1,
                    None => {
                        raw.insert(tok.to_owned(), 1);
                    }
                }
            }
        }
        let mut kept: Vec<(String, u64)> = raw.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_counts(kept)
    }

    /// Builds a vocabulary whose ids follow the order of `entries`.
    pub fn from_counts(entries: Vec<(String, u64)>) -> Self {
        let mut ids = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (i, (tok, c)) in entries.into_iter().enumerate() {
            ids.insert(tok.clone(), i as TokenId);
            tokens.push(tok);
            counts.push(c);
        }
        let total = counts.iter().sum();
        Vocabulary {
            ids,
            tokens,
            counts,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Occurrences of retained tokens.
    pub fn total(&self) -> u64 {
        self.total
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u32,
    pub token_ids: Vec<TokenId>,
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(' ').filter(|t| !t.is_empty())
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = Result<String>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .map(move |l| l.map_err(|e| Error::io(path, e))))
}

/// Reads a corpus file and keeps tokens seen at least `min_count` times.
pub fn build_vocabulary(corpus_path: impl AsRef<Path>, min_count: u64) -> Result<Vocabulary> {
    let path = corpus_path.as_ref();
    let lines = read_lines(path)?.collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::from_lines(&lines, min_count);
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_owned(),
            min_count,
        });
    }
    Ok(vocab)
}

/// Maps each non-blank line to a document. `doc_id` is the index among
/// non-blank lines; documents left empty after dropping out-of-vocabulary
/// tokens are skipped.
pub fn documents_from_lines<I, S>(lines: I, vocab: &Vocabulary) -> Vec<Document>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    lines
        .into_iter()
        .filter(|l| tokens(l.as_ref()).next().is_some())
        .enumerate()
        .filter_map(|(i, line)| {
            let token_ids: Vec<TokenId> = tokens(line.as_ref()).filter_map(|t| vocab.id(t)).collect();
            (!token_ids.is_empty()).then_some(Document {
                doc_id: i as u32,
                token_ids,
            })
        })
        .collect()
}

pub fn load_documents(corpus_path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<Document>> {
    let lines = read_lines(corpus_path.as_ref())?.collect::<Result<Vec<_>>>()?;
    Ok(documents_from_lines(&lines, vocab))
}

/// Draws negative words with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary, seed: u64) -> Self {
        Self::from_counts(vocab.counts(), seed)
    }

    pub fn from_counts(counts: &[u64], seed: u64) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(NEGATIVE_POWER);
                acc
            })
            .collect();
        cumulative.iter_mut().for_each(|c| *c /= acc);
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        NegativeSampler {
            cumulative,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn vocab_len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn draw(&mut self) -> TokenId {
        let r: f64 = self.rng.random();
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1) as TokenId
    }

    /// A token other than `exclude`. Needs at least two vocabulary entries.
    pub fn sample_negative(&mut self, exclude: TokenId) -> TokenId {
        let n = self.cumulative.len();
        debug_assert!(n >= 2, "negative sampling needs |V| >= 2");
        for _ in 0..MAX_NEGATIVE_RETRIES {
            let id = self.draw();
            if id != exclude {
                return id;
            }
        }
        let id = self.rng.random_range(0..n as TokenId - 1);
        if id >= exclude {
            id + 1
        } else {
            id
        }
    }
}

/// Probability of keeping one occurrence of a word under frequent-word
/// subsampling with the given threshold.
pub fn keep_probability(count: u64, total: u64, threshold: f64) -> f64 {
    let f = count as f64 / total as f64;
    ((f / threshold).sqrt() + 1.0) * threshold / f
}

/// Every `(center, context, doc_id)` with the context at offset
/// `-h <= k <= h, k != 0`, clipped at the document boundaries.
pub fn context_pairs(doc: &Document, h: usize) -> impl Iterator<Item = (TokenId, TokenId, u32)> + '_ {
    let toks = &doc.token_ids;
    let n = toks.len();
    (0..n).flat_map(move |j| {
        let lo = j.saturating_sub(h);
        let hi = (j + h).min(n.saturating_sub(1));
        (lo..=hi)
            .filter(move |&i| i != j)
            .map(move |i| (toks[j], toks[i], doc.doc_id))
    })
}
