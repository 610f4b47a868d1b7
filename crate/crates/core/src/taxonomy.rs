//! Category tree parsing, local-tree enumeration and the level-dependent
//! inter-category margins.
//!
//! The tree file holds `parent<TAB>child` edges, one per line. `ROOT` is the
//! reserved virtual root, `#` starts a comment, and edge order is irrelevant:
//! node ids follow BFS order with siblings sorted by name.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use crate::corpus::{TokenId, Vocabulary};
use crate::error::{Error, Result, TaxonomyError};
use crate::geometry::dot;

pub const ROOT_NAME: &str = "ROOT";
pub const ROOT_ID: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryNode {
    pub name: String,
    pub node_id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Vocabulary id of the name; `None` only for ROOT.
    pub token: Option<TokenId>,
}

impl CategoryNode {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: Vec<CategoryNode>,
}

/// A node together with its direct children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTree {
    pub root: usize,
    pub children: Vec<usize>,
}

impl LocalTree {
    /// Ordered sibling pairs `(i, j)`, `i != j`.
    pub fn sibling_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children.iter().flat_map(move |&i| {
            self.children
                .iter()
                .filter(move |&&j| j != i)
                .map(move |&j| (i, j))
        })
    }
}

/// `m_inter(L)` keyed by the level of the local-tree root.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelMargins {
    by_level: BTreeMap<usize, f64>,
}

impl LevelMargins {
    /// Margin for local trees rooted at `level`; 0 for levels without
    /// sibling pairs.
    pub fn get(&self, level: usize) -> f64 {
        self.by_level.get(&level).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.by_level.iter().map(|(&l, &m)| (l, m))
    }
}

impl FromIterator<(usize, f64)> for LevelMargins {
    fn from_iter<I: IntoIterator<Item = (usize, f64)>>(iter: I) -> Self {
        LevelMargins {
            by_level: iter.into_iter().collect(),
        }
    }
}

impl Taxonomy {
    /// Parses edge lines. Structure is validated before names are checked
    /// against the vocabulary.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self, TaxonomyError> {
        let mut parent_of: HashMap<&str, &str> = HashMap::new();
        let mut children_of: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let malformed = || TaxonomyError::Malformed {
                line: lineno + 1,
                text: raw.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(parent), Some(child), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(malformed());
            };
            let (parent, child) = (parent.trim(), child.trim());
            if parent.is_empty() || child.is_empty() || parent.contains(' ') || child.contains(' ') {
                return Err(malformed());
            }
            if child == parent {
                return Err(TaxonomyError::Cycle(child.to_string()));
            }
            if child == ROOT_NAME {
                return Err(TaxonomyError::Cycle(ROOT_NAME.to_string()));
            }
            if parent_of.insert(child, parent).is_some() {
                return Err(TaxonomyError::DuplicateName(child.to_string()));
            }
            children_of.entry(parent).or_default().push(child);
        }

        let mut orphans: Vec<String> = children_of
            .keys()
            .filter(|p| **p != ROOT_NAME && !parent_of.contains_key(*p))
            .map(|p| p.to_string())
            .collect();
        if !orphans.is_empty() {
            orphans.insert(0, ROOT_NAME.to_string());
            return Err(TaxonomyError::MultipleRoots(orphans));
        }
        if !children_of.contains_key(ROOT_NAME) {
            // every named node has a parent, so the edges can only form cycles
            return match parent_of.keys().min() {
                Some(name) => Err(TaxonomyError::Cycle(name.to_string())),
                None => Err(TaxonomyError::MissingRoot),
            };
        }

        let mut nodes = vec![CategoryNode {
            name: ROOT_NAME.to_string(),
            node_id: ROOT_ID,
            level: 0,
            parent: None,
            children: Vec::new(),
            token: None,
        }];
        let mut queue = VecDeque::from([ROOT_ID]);
        while let Some(id) = queue.pop_front() {
            let mut kids = children_of.get(nodes[id].name.as_str()).cloned().unwrap_or_default();
            kids.sort_unstable();
            for kid in kids {
                let child_id = nodes.len();
                nodes.push(CategoryNode {
                    name: kid.to_string(),
                    node_id: child_id,
                    level: nodes[id].level + 1,
                    parent: Some(id),
                    children: Vec::new(),
                    token: None,
                });
                nodes[id].children.push(child_id);
                queue.push_back(child_id);
            }
        }
        if nodes.len() != parent_of.len() + 1 {
            let reached: std::collections::HashSet<&str> = nodes.iter().map(|n| n.name.as_str()).collect();
            let stuck = parent_of.keys().filter(|n| !reached.contains(*n)).min().unwrap();
            return Err(TaxonomyError::Cycle(stuck.to_string()));
        }

        for node in nodes.iter_mut().skip(1) {
            node.token = Some(
                vocab
                    .id(&node.name)
                    .ok_or_else(|| TaxonomyError::NotInVocabulary(node.name.clone()))?,
            );
        }
        Ok(Taxonomy { nodes })
    }

    /// Builds a taxonomy whose names need not be vocabulary tokens
    /// (`token` stays `None`). Used for geometry-only work.
    pub fn parse_unchecked(text: &str) -> Result<Self, TaxonomyError> {
        let names: Vec<(String, u64)> = text
            .lines()
            .flat_map(|l| l.split('#').next().unwrap_or("").split('\t'))
            .map(|s| (s.trim().to_string(), 1))
            .filter(|(s, _)| !s.is_empty() && s != ROOT_NAME)
            .collect();
        let mut names = names;
        names.sort();
        names.dedup();
        let mut tax = Taxonomy::parse(text, &Vocabulary::from_counts(names))?;
        for n in &mut tax.nodes {
            n.token = None;
        }
        Ok(tax)
    }

    /// Serializes the edges in node order; parsing the output reproduces the
    /// same tree.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes[1..] {
            let parent = &self.nodes[node.parent.unwrap()].name;
            out.push_str(parent);
            out.push('\t');
            out.push_str(&node.name);
            out.push('\n');
        }
        out
    }

    pub fn nodes(&self) -> &[CategoryNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &CategoryNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Non-ROOT node ids.
    pub fn categories(&self) -> impl Iterator<Item = usize> + '_ {
        1..self.nodes.len()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.categories().filter(|&i| self.nodes[i].is_leaf())
    }

    /// One local tree per internal node, in BFS order.
    pub fn local_trees(&self) -> Vec<LocalTree> {
        self.nodes
            .iter()
            .filter(|n| !n.children.is_empty())
            .map(|n| LocalTree {
                root: n.node_id,
                children: n.children.clone(),
            })
            .collect()
    }
}

pub fn parse_taxonomy(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Taxonomy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(Taxonomy::parse(&text, vocab)?)
}

pub fn local_trees(taxonomy: &Taxonomy) -> Vec<LocalTree> {
    taxonomy.local_trees()
}

/// `m_inter(L) = (1/N_L) Σ_{c_r at L} Σ_{i≠j siblings} (c_i·c_r − c_i·c_j)`
/// over ordered sibling pairs. `centers` is indexed by node id.
pub fn compute_level_margins<C: AsRef<[f64]>>(taxonomy: &Taxonomy, centers: &[C]) -> LevelMargins {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for lt in taxonomy.local_trees() {
        let level = taxonomy.node(lt.root).level;
        let entry = sums.entry(level).or_insert((0.0, 0));
        let cr = centers[lt.root].as_ref();
        for (i, j) in lt.sibling_pairs() {
            let ci = centers[i].as_ref();
            entry.0 += dot(ci, cr) - dot(ci, centers[j].as_ref());
            entry.1 += 1;
        }
    }
    LevelMargins {
        by_level: sums
            .into_iter()
            .map(|(l, (s, n))| (l, if n == 0 { 0.0 } else { s / n as f64 }))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE_TREE: &str = "\
# three super-categories
ROOT\tarts
ROOT\tsports
ROOT\tscience
arts\tmusic
arts\tdance
sports\tbaseball
sports\tsoccer
science\tphysics
science\tchemistry
";

    fn vocab_of(text: &str) -> Vocabulary {
        let mut names: Vec<(String, u64)> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .flat_map(|l| l.split('\t'))
            .filter(|s| !s.is_empty() && *s != ROOT_NAME)
            .map(|s| (s.to_string(), 5))
            .collect();
        names.sort();
        names.dedup();
        Vocabulary::from_counts(names)
    }

    #[test]
    fn levels_from_bfs_depth() {
        let text = "sports\tsoccer\nROOT\tsports\n";
        let t = Taxonomy::parse(text, &vocab_of(text)).unwrap();
        assert_eq!(t.node(t.find("sports").unwrap()).level, 1);
        assert_eq!(t.node(t.find("soccer").unwrap()).level, 2);
    }

    #[test]
    fn figure_hierarchy_has_three_levels() {
        let t = Taxonomy::parse(FIGURE_TREE, &vocab_of(FIGURE_TREE)).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.len(), 10);
        let lts = t.local_trees();
        assert_eq!(lts.len(), 4);
        assert_eq!(lts[0].root, ROOT_ID);
    }

    #[test]
    fn structural_errors() {
        let text = "ROOT\tx\na\tb\nb\ta\n";
        assert!(matches!(
            Taxonomy::parse(text, &vocab_of(text)),
            Err(TaxonomyError::Cycle(_))
        ));
        let text = "a\tb\nb\ta\n";
        assert!(matches!(
            Taxonomy::parse(text, &vocab_of(text)),
            Err(TaxonomyError::Cycle(_))
        ));
        let text = "ROOT\ta\nROOT\tb\na\tc\nb\tc\n";
        assert_eq!(
            Taxonomy::parse(text, &vocab_of(text)),
            Err(TaxonomyError::DuplicateName("c".into()))
        );
        let text = "ROOT\ta\nz\tb\n";
        assert!(matches!(
            Taxonomy::parse(text, &vocab_of(text)),
            Err(TaxonomyError::MultipleRoots(_))
        ));
        let text = "ROOT a\n";
        assert!(matches!(
            Taxonomy::parse(text, &vocab_of("a")),
            Err(TaxonomyError::Malformed { line: 1, .. })
        ));
        let text = "ROOT\ta\tb\n";
        assert!(matches!(
            Taxonomy::parse(text, &vocab_of("a")),
            Err(TaxonomyError::Malformed { .. })
        ));
        let text = "ROOT\ta\na\tmissing\n";
        assert_eq!(
            Taxonomy::parse(text, &vocab_of("ROOT\ta")),
            Err(TaxonomyError::NotInVocabulary("missing".into()))
        );
    }

    #[test]
    fn order_independent_and_round_trips() {
        let shuffled: String = FIGURE_TREE.lines().rev().map(|l| format!("{l}\n")).collect();
        let v = vocab_of(FIGURE_TREE);
        let a = Taxonomy::parse(FIGURE_TREE, &v).unwrap();
        let b = Taxonomy::parse(&shuffled, &v).unwrap();
        assert_eq!(a, b);
        let c = Taxonomy::parse(&a.to_edge_list(), &v).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn chain_local_trees() {
        let t = Taxonomy::parse_unchecked("ROOT\ta\na\tb\n").unwrap();
        let lts = t.local_trees();
        assert_eq!(
            lts,
            vec![
                LocalTree { root: 0, children: vec![1] },
                LocalTree { root: 1, children: vec![2] },
            ]
        );
    }

    #[test]
    fn margin_for_symmetric_children() {
        let t = Taxonomy::parse_unchecked("ROOT\ta\nROOT\tb\n").unwrap();
        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let centers = vec![vec![1.0, 0.0], vec![c, s], vec![c, -s]];
        let m = compute_level_margins(&t, &centers);
        // cos30 - cos60, twice, averaged
        assert!((m.get(0) - 0.36602540378443865).abs() < 1e-12);
    }

    #[test]
    fn single_child_level_has_zero_margin() {
        let t = Taxonomy::parse_unchecked("ROOT\ta\n").unwrap();
        let m = compute_level_margins(&t, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m.get(0), 0.0);
        assert_eq!(m.get(7), 0.0);
    }

    #[test]
    fn margins_pool_local_trees_within_a_level() {
        let t = Taxonomy::parse_unchecked("ROOT\tp\nROOT\tq\np\ta\np\tb\nq\tc\nq\td\nq\te\n").unwrap();
        let angle = |deg: f64| vec![deg.to_radians().cos(), deg.to_radians().sin()];
        let centers: Vec<Vec<f64>> = [0.0, 40.0, -50.0, 10.0, 75.0, 120.0, -100.0, 33.0]
            .iter()
            .map(|&d| angle(d))
            .collect();
        let m = compute_level_margins(&t, &centers);
        let mut sum = 0.0;
        let mut n = 0;
        for r in [t.find("p").unwrap(), t.find("q").unwrap()] {
            let kids = &t.node(r).children;
            for &i in kids {
                for &j in kids {
                    if i != j {
                        sum += dot(&centers[i], &centers[r]) - dot(&centers[i], &centers[j]);
                        n += 1;
                    }
                }
            }
        }
        assert_eq!(n, 2 + 6);
        assert!((m.get(1) - sum / n as f64).abs() < 1e-12);
    }
}
