//! Automatic evaluation: sliding-window NPMI topic coherence and
//! single-label classification F1.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::{Document, TokenId, Vocabulary};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 10;
/// Added to joint co-occurrence counts so pairs never seen together stay finite.
pub const JOINT_SMOOTHING: f64 = 1e-12;

/// Window-level occurrence counts over a reference corpus.
///
/// A document shorter than the window contributes a single window holding all
/// of its tokens; longer documents contribute every full-length slide.
#[derive(Debug, Clone)]
pub struct ReferenceCorpus {
    windows: u64,
    single: HashMap<TokenId, u64>,
    joint: HashMap<(TokenId, TokenId), u64>,
}

impl ReferenceCorpus {
    /// Counts occurrences of `terms` (and their pairs) across all windows.
    pub fn count(docs: &[Document], terms: &BTreeSet<TokenId>, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("coherence window must be positive".into()));
        }
        let mut corpus = ReferenceCorpus {
            windows: 0,
            single: HashMap::new(),
            joint: HashMap::new(),
        };
        let mut present = Vec::with_capacity(window);
        for doc in docs {
            let ids = &doc.token_ids;
            if ids.is_empty() {
                continue;
            }
            let slides = ids.len().saturating_sub(window) + 1;
            for start in 0..slides {
                present.clear();
                present.extend(ids[start..(start + window).min(ids.len())].iter().filter(|w| terms.contains(w)));
                present.sort_unstable();
                present.dedup();
                corpus.windows += 1;
                for (i, &a) in present.iter().enumerate() {
                    *corpus.single.entry(a).or_default() += 1;
                    for &b in &present[i + 1..] {
                        *corpus.joint.entry((a, b)).or_default() += 1;
                    }
                }
            }
        }
        Ok(corpus)
    }

    pub fn windows(&self) -> u64 {
        self.windows
    }

    pub fn occurrences(&self, w: TokenId) -> u64 {
        self.single.get(&w).copied().unwrap_or(0)
    }

    pub fn co_occurrences(&self, a: TokenId, b: TokenId) -> u64 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.joint.get(&key).copied().unwrap_or(0)
    }

    /// NPMI of two terms, or `None` when either never occurs.
    pub fn npmi(&self, a: TokenId, b: TokenId) -> Option<f64> {
        let (ca, cb) = (self.occurrences(a), self.occurrences(b));
        if ca == 0 || cb == 0 {
            return None;
        }
        let n = self.windows as f64;
        let cab = self.co_occurrences(a, b);
        if cab == self.windows {
            return Some(1.0);
        }
        let pab = (cab as f64 + JOINT_SMOOTHING) / n;
        let pmi = (pab / ((ca as f64 / n) * (cb as f64 / n))).ln();
        Some((pmi / -pab.ln()).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCoherence {
    pub category: String,
    /// `None` when no pair in the topic could be scored.
    pub coherence: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub categories: Vec<CategoryCoherence>,
    /// Mean over categories with at least one scored pair.
    pub macro_average: f64,
    pub pairs: usize,
    pub skipped_pairs: usize,
    pub window: usize,
}

impl CoherenceReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("category\tcoherence\tpairs\n");
        for c in &self.categories {
            let tc = c.coherence.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
            s.push_str(&format!("{}\t{tc}\t{}\n", c.category, c.pairs));
        }
        s.push_str(&format!("MACRO\t{:.6}\t{}\n", self.macro_average, self.pairs));
        s
    }
}

/// Mean NPMI over unordered term pairs of each topic, averaged over topics.
/// Terms missing from `vocab` or from the reference windows are skipped.
pub fn topic_coherence(
    topics: &[(String, Vec<String>)],
    vocab: &Vocabulary,
    docs: &[Document],
    window: usize,
) -> Result<CoherenceReport> {
    if topics.is_empty() {
        return Err(Error::Config("no topics to evaluate".into()));
    }
    let resolved: Vec<Vec<Option<TokenId>>> = topics
        .iter()
        .map(|(_, terms)| terms.iter().map(|t| vocab.id(t)).collect())
        .collect();
    let wanted: BTreeSet<TokenId> = resolved.iter().flatten().flatten().copied().collect();
    let reference = ReferenceCorpus::count(docs, &wanted, window)?;

    let (mut pairs, mut skipped) = (0, 0);
    let mut categories = Vec::with_capacity(topics.len());
    for ((name, terms), ids) in topics.iter().zip(&resolved) {
        let (mut sum, mut scored) = (0.0, 0usize);
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                match ids[i].zip(ids[j]).and_then(|(a, b)| reference.npmi(a, b)) {
                    Some(v) => {
                        sum += v;
                        scored += 1;
                    }
                    None => {
                        log::debug!("skipping pair ({}, {}) in {name}: term not in reference corpus", terms[i], terms[j]);
                        skipped += 1;
                    }
                }
            }
        }
        pairs += scored;
        categories.push(CategoryCoherence {
            category: name.clone(),
            coherence: (scored > 0).then(|| sum / scored as f64),
            pairs: scored,
        });
    }
    let scored: Vec<f64> = categories.iter().filter_map(|c| c.coherence).collect();
    let macro_average = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(CoherenceReport {
        categories,
        macro_average,
        pairs,
        skipped_pairs: skipped,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub documents: usize,
}

/// Macro and Micro F1 of single-label predictions. Both lists must cover the
/// same doc ids. Classes are the union of gold and predicted labels.
pub fn classification_f1(predicted: &[(u32, String)], gold: &[(u32, String)]) -> Result<F1Scores> {
    let gold_by_id: HashMap<u32, &str> = gold.iter().map(|(id, l)| (*id, l.as_str())).collect();
    // tp, fp, fn per class
    let mut table: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    let mut correct = 0;
    for (id, p) in predicted {
        let g = *gold_by_id.get(id).ok_or(Error::MissingDocId(*id))?;
        if g == p {
            correct += 1;
            table.entry(g).or_default()[0] += 1;
        } else {
            table.entry(p.as_str()).or_default()[1] += 1;
            table.entry(g).or_default()[2] += 1;
        }
    }
    let pred_ids: BTreeSet<u32> = predicted.iter().map(|(id, _)| *id).collect();
    if let Some((id, _)) = gold.iter().find(|(id, _)| !pred_ids.contains(id)) {
        return Err(Error::MissingDocId(*id));
    }
    if predicted.is_empty() {
        return Err(Error::Config("no labeled documents".into()));
    }
    let macro_f1 = table
        .values()
        .map(|&[tp, fp, fn_]| 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
        .sum::<f64>()
        / table.len() as f64;
    Ok(F1Scores {
        macro_f1,
        micro_f1: correct as f64 / predicted.len() as f64,
        documents: predicted.len(),
    })
}
