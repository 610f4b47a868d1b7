//! Planted-topic corpus generator with a known two-level taxonomy.
//!
//! Leaf `(i, j)` owns a disjoint vocabulary whose first word doubles as the
//! leaf's category name. A document picks a leaf uniformly, then draws each
//! token from a shared noise pool with probability `noise` and otherwise
//! uniformly from the leaf vocabulary extended with the parent's name, so
//! every category name occurs in the corpus.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::taxonomy::ROOT_NAME;

pub const NOISE_POOL: usize = 200;
pub const CORPUS_FILE: &str = "corpus.txt";
pub const TAXONOMY_FILE: &str = "taxonomy.tsv";
pub const GOLD_FILE: &str = "gold.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub supers: usize,
    pub subs: usize,
    pub vocab_per_topic: usize,
    pub docs: usize,
    pub doc_len: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            supers: 3,
            subs: 3,
            vocab_per_topic: 50,
            docs: 3000,
            doc_len: 60,
            noise: 0.2,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("super", self.supers),
            ("sub", self.subs),
            ("vocab-per-topic", self.vocab_per_topic),
            ("docs", self.docs),
            ("doc-len", self.doc_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("--{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("--noise must lie in [0, 1], got {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedLeaf {
    pub name: String,
    pub parent: String,
    /// Topical vocabulary, name first.
    pub vocab: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub lines: Vec<String>,
    pub leaves: Vec<PlantedLeaf>,
    pub supers: Vec<String>,
    /// Leaf index per document.
    pub doc_leaf: Vec<usize>,
}

pub fn super_name(i: usize) -> String {
    format!("super{i}")
}

pub fn noise_token(k: usize) -> String {
    format!("noise{k}")
}

fn leaf_word(i: usize, j: usize, k: usize) -> String {
    if k == 0 {
        format!("leaf{i}x{j}")
    } else {
        format!("w{i}x{j}x{k}")
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let supers: Vec<String> = (0..config.supers).map(super_name).collect();
    let leaves: Vec<PlantedLeaf> = (0..config.supers)
        .flat_map(|i| (0..config.subs).map(move |j| (i, j)))
        .map(|(i, j)| PlantedLeaf {
            name: leaf_word(i, j, 0),
            parent: super_name(i),
            vocab: (0..config.vocab_per_topic).map(|k| leaf_word(i, j, k)).collect(),
        })
        .collect();
    let noise: Vec<String> = (0..NOISE_POOL).map(noise_token).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lines = Vec::with_capacity(config.docs);
    let mut doc_leaf = Vec::with_capacity(config.docs);
    let mut tokens: Vec<&str> = Vec::with_capacity(config.doc_len);
    for _ in 0..config.docs {
        let l = rng.random_range(0..leaves.len());
        let leaf = &leaves[l];
        tokens.clear();
        for _ in 0..config.doc_len {
            let tok = if rng.random::<f64>() < config.noise {
                noise[rng.random_range(0..NOISE_POOL)].as_str()
            } else {
                let k = rng.random_range(0..=leaf.vocab.len());
                leaf.vocab.get(k).unwrap_or(&leaf.parent).as_str()
            };
            tokens.push(tok);
        }
        lines.push(tokens.join(" "));
        doc_leaf.push(l);
    }
    Ok(SynthCorpus {
        lines,
        leaves,
        supers,
        doc_leaf,
    })
}

impl SynthCorpus {
    pub fn taxonomy_tsv(&self) -> String {
        let mut s = String::new();
        for sup in &self.supers {
            s.push_str(&format!("{ROOT_NAME}\t{sup}\n"));
        }
        for leaf in &self.leaves {
            s.push_str(&format!("{}\t{}\n", leaf.parent, leaf.name));
        }
        s
    }

    /// `(doc_id, leaf name)` pairs; doc ids are line indices.
    pub fn gold(&self) -> Vec<(u32, String)> {
        self.doc_leaf
            .iter()
            .enumerate()
            .map(|(i, &l)| (i as u32, self.leaves[l].name.clone()))
            .collect()
    }

    /// Writes `corpus.txt`, `taxonomy.tsv` and `gold.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut corpus = self.lines.join("\n");
        corpus.push('\n');
        let gold: String = self.gold().iter().map(|(id, l)| format!("{id}\t{l}\n")).collect();
        for (name, body) in [(CORPUS_FILE, corpus), (TAXONOMY_FILE, self.taxonomy_tsv()), (GOLD_FILE, gold)] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::taxonomy::Taxonomy;
    use std::collections::HashMap;

    fn small() -> SynthConfig {
        SynthConfig {
            docs: 300,
            doc_len: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_sizes() {
        let s = generate(&SynthConfig::default()).unwrap();
        assert_eq!(s.lines.len(), 3000);
        assert!(s.lines.iter().all(|l| l.split(' ').count() == 60));
        assert_eq!(s.leaves.len(), 9);
    }

    #[test]
    fn zero_noise_tokens_map_to_one_leaf() {
        let s = generate(&SynthConfig { noise: 0.0, ..small() }).unwrap();
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for (l, leaf) in s.leaves.iter().enumerate() {
            for w in &leaf.vocab {
                assert!(owner.insert(w, l).is_none());
            }
        }
        for (line, &l) in s.lines.iter().zip(&s.doc_leaf) {
            for tok in line.split(' ') {
                if tok != s.leaves[l].parent {
                    assert_eq!(owner[tok], l);
                }
            }
        }
    }

    #[test]
    fn token_marginals_match_mixture() {
        let cfg = SynthConfig::default();
        let s = generate(&cfg).unwrap();
        let mut noise = 0usize;
        let mut topical = vec![0usize; s.leaves.len()];
        let mut per_leaf_total = vec![0usize; s.leaves.len()];
        let mut parent_hits = 0usize;
        for (line, &l) in s.lines.iter().zip(&s.doc_leaf) {
            for tok in line.split(' ') {
                per_leaf_total[l] += 1;
                if tok.starts_with("noise") {
                    noise += 1;
                } else if tok == s.leaves[l].parent {
                    parent_hits += 1;
                } else {
                    topical[l] += 1;
                }
            }
        }
        let total = (cfg.docs * cfg.doc_len) as f64;
        let rel = |got: f64, want: f64| (got - want).abs() / want;
        assert!(rel(noise as f64 / total, cfg.noise) < 0.02);
        let v = cfg.vocab_per_topic as f64;
        // a single rare token, so the sampling error alone is near 2%
        assert!(rel(parent_hits as f64 / total, (1.0 - cfg.noise) / (v + 1.0)) < 0.05);
        for l in 0..s.leaves.len() {
            let frac = topical[l] as f64 / per_leaf_total[l] as f64;
            assert!(rel(frac, (1.0 - cfg.noise) * v / (v + 1.0)) < 0.02, "leaf {l}: {frac}");
        }
    }

    #[test]
    fn taxonomy_parses_against_corpus_vocabulary() {
        let s = generate(&small()).unwrap();
        let vocab = Vocabulary::from_lines(&s.lines, 1);
        let tax = Taxonomy::parse(&s.taxonomy_tsv(), &vocab).unwrap();
        assert_eq!(tax.len(), 1 + 3 + 9);
        assert_eq!(tax.depth(), 2);
        assert_eq!(tax.leaves().count(), 9);
    }

    #[test]
    fn seeded_output_is_reproducible() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = generate(&SynthConfig { seed: 43, ..small() }).unwrap();
        assert_ne!(other.lines, generate(&small()).unwrap().lines);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate(&SynthConfig { docs: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { noise: 1.5, ..small() }).is_err());
    }

    #[test]
    fn writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate(&small()).unwrap();
        s.write(dir.path()).unwrap();
        let corpus = fs::read_to_string(dir.path().join(CORPUS_FILE)).unwrap();
        assert_eq!(corpus.lines().count(), 300);
        assert!(corpus.ends_with('\n'));
        let gold = fs::read_to_string(dir.path().join(GOLD_FILE)).unwrap();
        assert!(gold.starts_with(&format!("0\t{}\n", s.leaves[s.doc_leaf[0]].name)));
        assert_eq!(fs::read_to_string(dir.path().join(TAXONOMY_FILE)).unwrap(), s.taxonomy_tsv());
    }
}
