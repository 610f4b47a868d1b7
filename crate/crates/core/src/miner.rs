//! Topic output and the generative vMF document classifier.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::geometry::{dot, log_vmf_normalizer};
use crate::model::ModelState;
use crate::trainer::top_terms;

#[derive(Debug, Clone, PartialEq)]
pub struct TopicResult {
    pub node_id: usize,
    pub category: String,
    pub term_ids: Vec<TokenId>,
    pub terms: Vec<String>,
    /// Log vMF density of each term under its category.
    pub scores: Vec<f64>,
}

/// Per category, the top-(K+1) tokens by log density with the category's own
/// name removed, truncated to K.
pub fn mine_topics(state: &ModelState) -> Vec<TopicResult> {
    let k = state.config.k;
    state
        .taxonomy
        .categories()
        .map(|node| {
            let name = state.taxonomy.node(node).token;
            let ranked: Vec<(TokenId, f64)> = top_terms(state, node, k + 1)
                .into_iter()
                .filter(|(w, _)| Some(*w) != name)
                .take(k)
                .collect();
            TopicResult {
                node_id: node,
                category: state.taxonomy.node(node).name.clone(),
                term_ids: ranked.iter().map(|(w, _)| *w).collect(),
                terms: ranked.iter().map(|(w, _)| state.vocab.token(*w).to_string()).collect(),
                scores: ranked.iter().map(|(_, s)| *s).collect(),
            }
        })
        .collect()
}

/// `category<TAB>term1<TAB>…`, or `term:score` fields when `scored`.
pub fn write_topics<W: Write>(topics: &[TopicResult], scored: bool, mut out: W) -> std::io::Result<()> {
    for topic in topics {
        write!(out, "{}", topic.category)?;
        for (term, score) in topic.terms.iter().zip(&topic.scores) {
            if scored {
                write!(out, "\t{term}:{score}")?;
            } else {
                write!(out, "\t{term}")?;
            }
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Reads a topics file (plain or scored) as `(category, terms)`.
pub fn read_topics(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut topics = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let category = fields.next().unwrap_or_default().to_string();
        if category.is_empty() {
            return Err(Error::Format {
                path: path.to_owned(),
                line: i + 1,
                message: "missing category".into(),
            });
        }
        let terms = fields
            .map(|f| match f.rsplit_once(':') {
                Some((term, score)) if score.parse::<f64>().is_ok() => term.to_string(),
                _ => f.to_string(),
            })
            .collect();
        topics.push((category, terms));
    }
    Ok(topics)
}

/// Which nodes compete in the argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifyMode {
    /// Every non-ROOT node.
    AllNodes,
    Leaves,
    /// Nodes at one depth (ROOT is level 0).
    Level(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocLabel {
    pub doc_id: u32,
    pub predicted: usize,
    /// Log density per node id; `-inf` for nodes outside the candidate set.
    pub log_densities: Vec<f64>,
}

impl DocLabel {
    pub fn score(&self) -> f64 {
        self.log_densities[self.predicted]
    }
}

/// Caches per-category normalizers for repeated classification.
pub struct Classifier<'a> {
    state: &'a ModelState,
    candidates: Vec<usize>,
    log_norms: Vec<f64>,
    centers: Vec<Vec<f64>>,
}

impl<'a> Classifier<'a> {
    pub fn new(state: &'a ModelState, mode: ClassifyMode) -> Result<Self> {
        let tax = &state.taxonomy;
        let candidates: Vec<usize> = match mode {
            ClassifyMode::AllNodes => tax.categories().collect(),
            ClassifyMode::Leaves => tax.leaves().collect(),
            ClassifyMode::Level(l) => tax.categories().filter(|&n| tax.node(n).level == l).collect(),
        };
        if candidates.is_empty() {
            return Err(Error::EmptyTaxonomy);
        }
        let log_norms = (0..tax.len())
            .map(|n| log_vmf_normalizer(state.dim(), state.kappa[n]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Classifier {
            state,
            candidates,
            log_norms,
            centers: state.c.to_rows(),
        })
    }

    /// `argmax_c log n_p(κ_c) + κ_c ⟨d, c⟩` over the candidate nodes; ties go
    /// to the smaller node id.
    pub fn classify(&self, doc_id: u32, doc: &[f64]) -> DocLabel {
        let mut log_densities = vec![f64::NEG_INFINITY; self.centers.len()];
        let mut best = self.candidates[0];
        for &node in &self.candidates {
            let score = self.log_norms[node] + self.state.kappa[node] * dot(doc, &self.centers[node]);
            log_densities[node] = score;
            if score > log_densities[best] {
                best = node;
            }
        }
        DocLabel {
            doc_id,
            predicted: best,
            log_densities,
        }
    }
}

pub fn classify(state: &ModelState, doc_id: u32, doc: &[f64], mode: ClassifyMode) -> Result<DocLabel> {
    Ok(Classifier::new(state, mode)?.classify(doc_id, doc))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassSummary {
    /// Documents assigned to each node, in node order (zero counts kept).
    pub counts: Vec<(String, usize)>,
    pub total: usize,
}

/// Classifies every trained document embedding.
pub fn classify_corpus(state: &ModelState, mode: ClassifyMode) -> Result<(Vec<DocLabel>, ClassSummary)> {
    let classifier = Classifier::new(state, mode)?;
    let mut row = vec![0.0; state.dim()];
    let labels: Vec<DocLabel> = state
        .doc_ids
        .iter()
        .enumerate()
        .map(|(r, &id)| {
            state.d.read_row(r, &mut row);
            classifier.classify(id, &row)
        })
        .collect();
    let mut counts = vec![0usize; state.taxonomy.len()];
    for l in &labels {
        counts[l.predicted] += 1;
    }
    let summary = ClassSummary {
        counts: classifier
            .candidates
            .iter()
            .map(|&n| (state.taxonomy.node(n).name.clone(), counts[n]))
            .collect(),
        total: labels.len(),
    };
    Ok((labels, summary))
}

/// `doc_id<TAB>node_name<TAB>log_density` per document.
pub fn write_labels<W: Write>(state: &ModelState, labels: &[DocLabel], mut out: W) -> std::io::Result<()> {
    for l in labels {
        writeln!(out, "{}\t{}\t{}", l.doc_id, state.taxonomy.node(l.predicted).name, l.score())?;
    }
    out.flush()
}

/// Reads `doc_id<TAB>label[<TAB>…]` lines (labels or gold files).
pub fn read_labels(path: &Path) -> Result<Vec<(u32, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let parsed = match (f.next().map(str::parse::<u32>), f.next()) {
            (Some(Ok(id)), Some(label)) if !label.is_empty() => Some((id, label.to_string())),
            _ => None,
        };
        out.push(parsed.ok_or_else(|| Error::Format {
            path: path.to_owned(),
            line: i + 1,
            message: "expected `doc_id<TAB>label`".into(),
        })?);
    }
    Ok(out)
}

pub fn write_labels_file(state: &ModelState, labels: &[DocLabel], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_labels(state, labels, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn write_topics_file(topics: &[TopicResult], scored: bool, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_topics(topics, scored, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Map from node name to node id.
pub fn node_index(state: &ModelState) -> HashMap<&str, usize> {
    state
        .taxonomy
        .nodes()
        .iter()
        .map(|n| (n.name.as_str(), n.node_id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::geometry::{log_vmf_density, UnitVector, VmfParams};
    use crate::model::{init_model, EmbeddingMatrix, Role};
    use crate::taxonomy::Taxonomy;
    use crate::trainer::TrainConfig;

    fn at_angle(deg: f64) -> Vec<f64> {
        vec![deg.to_radians().cos(), deg.to_radians().sin()]
    }

    /// Tokens t0..t{n-1}, categories named by `tree`, centers and words in
    /// the plane.
    fn planar(words: &[Vec<f64>], centers: &[Vec<f64>], tree: &str, k: usize) -> ModelState {
        let vocab = Vocabulary::from_counts((0..words.len()).map(|i| (format!("t{i}"), 1)).collect());
        let tax = Taxonomy::parse(tree, &vocab).unwrap();
        let cfg = TrainConfig { dim: words[0].len(), k, ..TrainConfig::default() };
        let docs = vec![Document { doc_id: 0, token_ids: vec![0] }];
        let mut s = init_model(&vocab, &docs, &tax, &cfg, 1).unwrap();
        s.u = EmbeddingMatrix::from_rows(Role::CenterWord, words);
        s.c = EmbeddingMatrix::from_rows(Role::Category, centers);
        s
    }

    #[test]
    fn name_ranked_first_is_dropped() {
        // t0 is the category name and sits on the center.
        let words: Vec<_> = [0.0, 10.0, 20.0, 30.0, 40.0].iter().map(|&a| at_angle(a)).collect();
        let s = planar(&words, &[at_angle(180.0), at_angle(0.0)], "ROOT\tt0\n", 3);
        let topics = mine_topics(&s);
        assert_eq!(topics[0].terms, vec!["t1", "t2", "t3"]);
        assert!(topics[0].scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn name_outside_top_keeps_first_k() {
        let words: Vec<_> = [170.0, 10.0, 20.0, 30.0, 40.0].iter().map(|&a| at_angle(a)).collect();
        let s = planar(&words, &[at_angle(180.0), at_angle(0.0)], "ROOT\tt0\n", 3);
        assert_eq!(mine_topics(&s)[0].terms, vec!["t1", "t2", "t3"]);
    }

    #[test]
    fn scores_are_log_densities() {
        let words: Vec<_> = [5.0, 50.0, -20.0, 100.0].iter().map(|&a| at_angle(a)).collect();
        let mut s = planar(&words, &[at_angle(180.0), at_angle(0.0)], "ROOT\tt3\n", 2);
        s.kappa[1] = 37.0;
        for topic in mine_topics(&s) {
            let params = VmfParams::new(UnitVector::new(s.c.row(topic.node_id)).unwrap(), 37.0).unwrap();
            for (&w, &score) in topic.term_ids.iter().zip(&topic.scores) {
                let x = UnitVector::new(s.u.row(w as usize)).unwrap();
                assert!((log_vmf_density(&x, &params).unwrap() - score).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equal_kappa_reduces_to_cosine() {
        let words = vec![at_angle(0.0), at_angle(90.0)];
        let s = planar(&words, &[at_angle(180.0), at_angle(0.0), at_angle(90.0)], "ROOT\tt0\nROOT\tt1\n", 1);
        let label = classify(&s, 0, &at_angle(60.0), ClassifyMode::AllNodes).unwrap();
        assert_eq!(s.taxonomy.node(label.predicted).name, "t1");
        let label = classify(&s, 0, &at_angle(30.0), ClassifyMode::AllNodes).unwrap();
        assert_eq!(s.taxonomy.node(label.predicted).name, "t0");
    }

    #[test]
    fn full_densities_decide_between_concentrations() {
        // cos(d, c1) = 0.6 with κ = 500 against cos(d, c2) = 0.7 with κ = 50
        let c1 = vec![0.8, 0.0, 0.6];
        let c2 = vec![0.0, (1.0f64 - 0.49).sqrt(), 0.7];
        let d = vec![0.0, 0.0, 1.0];
        let mut s = planar(&[c1.clone(), c2.clone()], &[vec![-1.0, 0.0, 0.0], c1, c2], "ROOT\tt0\nROOT\tt1\n", 1);
        s.kappa[1] = 500.0;
        s.kappa[2] = 50.0;
        let label = classify(&s, 0, &d, ClassifyMode::AllNodes).unwrap();
        // n_3(κ) = κ / (4π sinh κ), with log sinh κ = κ − log 2 + log(1 − e^{−2κ})
        let oracle = |kappa: f64, cos: f64| {
            kappa.ln() - (4.0 * std::f64::consts::PI).ln() - (kappa - 2f64.ln() + (-(-2.0 * kappa).exp()).ln_1p()) + kappa * cos
        };
        let (s1, s2) = (oracle(500.0, 0.6), oracle(50.0, 0.7));
        assert!((label.log_densities[1] - s1).abs() < 1e-9);
        assert!((label.log_densities[2] - s2).abs() < 1e-9);
        assert_eq!(label.predicted, if s1 >= s2 { 1 } else { 2 });
        assert_eq!(label.predicted, 2);
    }

    #[test]
    fn exact_center_with_larger_kappa_wins() {
        let c1 = at_angle(10.0);
        let words = vec![c1.clone(), at_angle(50.0)];
        let mut s = planar(&words, &[at_angle(180.0), c1.clone(), at_angle(50.0)], "ROOT\tt0\nROOT\tt1\n", 1);
        s.kappa[1] = 80.0;
        s.kappa[2] = 40.0;
        let label = classify(&s, 0, &c1, ClassifyMode::AllNodes).unwrap();
        assert_eq!(label.predicted, 1);
    }

    #[test]
    fn leaf_and_level_modes() {
        let words = vec![at_angle(0.0), at_angle(5.0), at_angle(90.0)];
        let s = planar(&words, &[at_angle(180.0), at_angle(0.0), at_angle(90.0), at_angle(5.0)], "ROOT\tt0\nt0\tt1\nROOT\tt2\n", 1);
        let doc = at_angle(1.0);
        assert_eq!(classify(&s, 0, &doc, ClassifyMode::AllNodes).unwrap().predicted, 1);
        let leaf = classify(&s, 0, &doc, ClassifyMode::Leaves).unwrap();
        assert_eq!(s.taxonomy.node(leaf.predicted).name, "t1");
        assert_eq!(leaf.log_densities[1], f64::NEG_INFINITY);
        let lvl = classify(&s, 0, &doc, ClassifyMode::Level(1)).unwrap();
        assert_eq!(s.taxonomy.node(lvl.predicted).name, "t0");
        assert!(matches!(classify(&s, 0, &doc, ClassifyMode::Level(5)), Err(Error::EmptyTaxonomy)));
    }

    #[test]
    fn corpus_summary_counts_sum_to_documents() {
        let words = vec![at_angle(0.0), at_angle(90.0)];
        let mut s = planar(&words, &[at_angle(180.0), at_angle(0.0), at_angle(90.0)], "ROOT\tt0\nROOT\tt1\n", 1);
        s.doc_ids = vec![3, 4, 9];
        s.d = EmbeddingMatrix::from_rows(Role::Document, &[at_angle(10.0), at_angle(80.0), at_angle(100.0)]);
        let (labels, summary) = classify_corpus(&s, ClassifyMode::Leaves).unwrap();
        assert_eq!(labels.iter().map(|l| l.doc_id).collect::<Vec<_>>(), vec![3, 4, 9]);
        assert_eq!(summary.total, 3);
        assert_eq!(summary.counts.iter().map(|(_, c)| c).sum::<usize>(), 3);
        assert_eq!(summary.counts, vec![("t0".to_string(), 1), ("t1".to_string(), 2)]);

        s.doc_ids.clear();
        let (labels, summary) = classify_corpus(&s, ClassifyMode::Leaves).unwrap();
        assert!(labels.is_empty());
        assert_eq!(summary.total, 0);
    }

    #[test]
    fn topics_file_round_trip() {
        let topics = vec![TopicResult {
            node_id: 1,
            category: "sports".into(),
            term_ids: vec![1, 2],
            terms: vec!["goal".into(), "los_angeles".into()],
            scores: vec![-1.5, -2.25],
        }];
        let dir = tempfile::tempdir().unwrap();
        for scored in [false, true] {
            let path = dir.path().join("t.tsv");
            write_topics_file(&topics, scored, &path).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            assert!(text.ends_with('\n'));
            let back = read_topics(&path).unwrap();
            assert_eq!(back, vec![("sports".to_string(), vec!["goal".to_string(), "los_angeles".to_string()])]);
        }
    }
}
