//! Parameter store: word, context, document and category embeddings on the
//! unit sphere, plus persistence.
//!
//! Rows live in relaxed atomic cells so training workers can share one
//! `ModelState` and update rows without locks (last write wins). With a
//! single worker every read and write is ordered and training is
//! bit-reproducible.
//!
//! `model.bin` layout (all integers and floats little-endian):
//!
//! ```text
//! magic    b"JOSHMODL"
//! version  u32 (= 1)
//! config   dim u32, window u32, k u32, alpha0 f64, margin f64, margin_intra f64,
//!          min_count u64, epochs_per_mstep u32, tree_passes u32, threads u32,
//!          seed u64, subsample f64 (0 = off)
//! t        u32
//! vocab    n u32, then per token: len u32, utf-8 bytes, count u64
//! docs     n u32, then doc_id u32 each
//! tree     n u32, then per node: name (len u32 + bytes), parent u32 (u32::MAX for ROOT)
//! kappa    f64 per node
//! rep      per node: len u32, token ids u32
//! u, v, d, c   rows u32, dim u32, rows*dim f64
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Document, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::{normalize_in_place, norm};
use crate::taxonomy::{Taxonomy, ROOT_NAME};
use crate::trainer::TrainConfig;

pub const MODEL_FILE: &str = "model.bin";
const MAGIC: &[u8; 8] = b"JOSHMODL";
const FORMAT_VERSION: u32 = 1;
const LOAD_NORM_TOL: f64 = 1e-3;

/// Initial concentration of every category.
pub const INITIAL_KAPPA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    CenterWord,
    ContextWord,
    Document,
    Category,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::CenterWord => "u",
            Role::ContextWord => "v",
            Role::Document => "doc",
            Role::Category => "cat",
        }
    }
}

/// Row-major matrix of unit vectors.
#[derive(Debug)]
pub struct EmbeddingMatrix {
    role: Role,
    dim: usize,
    cells: Vec<AtomicU64>,
}

impl Clone for EmbeddingMatrix {
    fn clone(&self) -> Self {
        Self::from_flat(self.role, self.dim, self.to_flat())
    }
}

impl PartialEq for EmbeddingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.role == other.role
            && self.dim == other.dim
            && self.cells.len() == other.cells.len()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

impl EmbeddingMatrix {
    pub fn from_flat(role: Role, dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        EmbeddingMatrix {
            role,
            dim,
            cells: data.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
        }
    }

    pub fn from_rows(role: Role, rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        Self::from_flat(role, dim, rows.concat())
    }

    /// `rows` i.i.d. standard-normal vectors projected onto the sphere.
    pub fn random(role: Role, rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut data = vec![0.0; rows * dim];
        for row in data.chunks_mut(dim) {
            fill_unit_gaussian(row, rng);
        }
        Self::from_flat(role, dim, data)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.cells.len() / self.dim
    }

    #[inline]
    pub fn read_row(&self, row: usize, out: &mut [f64]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    #[inline]
    pub fn write_row(&self, row: usize, values: &[f64]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, v) in cells.iter().zip(values) {
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.read_row(row, &mut out);
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r)).collect()
    }

    /// Largest `|‖row‖ − 1|` over all rows.
    pub fn max_norm_deviation(&self) -> f64 {
        self.to_flat()
            .chunks(self.dim)
            .map(|r| (norm(r) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn fill_unit_gaussian(row: &mut [f64], rng: &mut ChaCha8Rng) {
    loop {
        row.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
        if normalize_in_place(row) {
            return;
        }
    }
}

/// Everything the trainer optimizes, plus what is needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    /// `doc_ids[r]` is the corpus doc id of document row `r`.
    pub doc_ids: Vec<u32>,
    pub taxonomy: Taxonomy,
    pub u: EmbeddingMatrix,
    pub v: EmbeddingMatrix,
    pub d: EmbeddingMatrix,
    /// Category centers indexed by node id (ROOT included).
    pub c: EmbeddingMatrix,
    pub kappa: Vec<f64>,
    /// Representative terms per node; empty for ROOT.
    pub rep_terms: Vec<Vec<TokenId>>,
    /// EM iteration index.
    pub t: usize,
}

impl ModelState {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn matrices(&self) -> [&EmbeddingMatrix; 4] {
        [&self.u, &self.v, &self.d, &self.c]
    }
}

/// Random unit-sphere initialization. Category centers start at the center
/// embedding of their name token (ROOT gets a random direction), every κ
/// starts at [`INITIAL_KAPPA`] and each category's term set is its name.
pub fn init_model(
    vocab: &Vocabulary,
    docs: &[Document],
    taxonomy: &Taxonomy,
    config: &TrainConfig,
    seed: u64,
) -> Result<ModelState> {
    config.validate()?;
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = EmbeddingMatrix::random(Role::CenterWord, vocab.len(), dim, &mut rng);
    let v = EmbeddingMatrix::random(Role::ContextWord, vocab.len(), dim, &mut rng);
    let d = EmbeddingMatrix::random(Role::Document, docs.len().max(1), dim, &mut rng);
    let mut centers = vec![0.0; taxonomy.len() * dim];
    for (node, row) in taxonomy.nodes().iter().zip(centers.chunks_mut(dim)) {
        match node.token {
            Some(tok) => u.read_row(tok as usize, row),
            None if node.is_root() => fill_unit_gaussian(row, &mut rng),
            None => {
                return Err(Error::Config(format!(
                    "category {:?} has no vocabulary token",
                    node.name
                )))
            }
        }
    }
    let rep_terms = taxonomy
        .nodes()
        .iter()
        .map(|n| n.token.into_iter().collect())
        .collect();
    Ok(ModelState {
        config: config.clone(),
        vocab: vocab.clone(),
        doc_ids: docs.iter().map(|d| d.doc_id).collect(),
        taxonomy: taxonomy.clone(),
        u,
        v,
        d,
        c: EmbeddingMatrix::from_flat(Role::Category, dim, centers),
        kappa: vec![INITIAL_KAPPA; taxonomy.len()],
        rep_terms,
        t: 1,
    })
}

// ---------------------------------------------------------------------------
// binary format

struct Encoder<W: Write> {
    out: W,
}

impl<W: Write> Encoder<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.out.write_all(b)
    }
    fn u32(&mut self, x: u32) -> std::io::Result<()> {
        self.bytes(&x.to_le_bytes())
    }
    fn u64(&mut self, x: u64) -> std::io::Result<()> {
        self.bytes(&x.to_le_bytes())
    }
    fn f64(&mut self, x: f64) -> std::io::Result<()> {
        self.bytes(&x.to_le_bytes())
    }
    fn len(&mut self, n: usize) -> std::io::Result<()> {
        self.u32(u32::try_from(n).expect("length exceeds u32"))
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.len(s.len())?;
        self.bytes(s.as_bytes())
    }
    fn matrix(&mut self, m: &EmbeddingMatrix) -> std::io::Result<()> {
        self.len(m.rows())?;
        self.len(m.dim())?;
        for x in m.to_flat() {
            self.f64(x)?;
        }
        Ok(())
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Corrupted("unexpected end of file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > self.buf.len() {
            return Err(Error::Corrupted(format!("length {n} exceeds remaining bytes")));
        }
        Ok(n)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Corrupted("invalid utf-8".into()))
    }
    fn matrix(&mut self, role: Role, dim: usize) -> Result<EmbeddingMatrix> {
        let rows = self.u32()? as usize;
        let got = self.u32()? as usize;
        if got != dim {
            return Err(Error::Corrupted(format!("{} matrix has dim {got}, expected {dim}", role.name())));
        }
        let bytes = self.take(rows.checked_mul(dim).and_then(|n| n.checked_mul(8)).ok_or_else(|| {
            Error::Corrupted("matrix size overflow".into())
        })?)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        for (r, row) in data.chunks(dim).enumerate() {
            let n = norm(row);
            if !((n - 1.0).abs() <= LOAD_NORM_TOL) {
                return Err(Error::NormViolation {
                    matrix: role.name(),
                    row: r,
                    norm: n,
                });
            }
        }
        Ok(EmbeddingMatrix::from_flat(role, dim, data))
    }
}

fn encode_state<W: Write>(state: &ModelState, out: W) -> std::io::Result<()> {
    let mut e = Encoder { out };
    let cfg = &state.config;
    e.bytes(MAGIC)?;
    e.u32(FORMAT_VERSION)?;
    e.len(cfg.dim)?;
    e.len(cfg.window)?;
    e.len(cfg.k)?;
    e.f64(cfg.alpha0)?;
    e.f64(cfg.margin)?;
    e.f64(cfg.margin_intra)?;
    e.u64(cfg.min_count)?;
    e.len(cfg.epochs_per_mstep)?;
    e.len(cfg.tree_passes_per_mstep)?;
    e.len(cfg.threads)?;
    e.u64(cfg.seed)?;
    e.f64(cfg.subsample.unwrap_or(0.0))?;
    e.len(state.t)?;

    e.len(state.vocab.len())?;
    for (tok, &count) in state.vocab.tokens().iter().zip(state.vocab.counts()) {
        e.str(tok)?;
        e.u64(count)?;
    }
    e.len(state.doc_ids.len())?;
    for &id in &state.doc_ids {
        e.u32(id)?;
    }
    e.len(state.taxonomy.len())?;
    for node in state.taxonomy.nodes() {
        e.str(&node.name)?;
        e.u32(node.parent.map_or(u32::MAX, |p| p as u32))?;
    }
    for &k in &state.kappa {
        e.f64(k)?;
    }
    for terms in &state.rep_terms {
        e.len(terms.len())?;
        for &t in terms {
            e.u32(t)?;
        }
    }
    for m in state.matrices() {
        e.matrix(m)?;
    }
    e.out.flush()
}

fn decode_state(buf: &[u8]) -> Result<ModelState> {
    let mut d = Decoder { buf };
    if d.take(MAGIC.len())? != MAGIC {
        return Err(Error::Corrupted("bad magic".into()));
    }
    let version = d.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let config = TrainConfig {
        dim: d.u32()? as usize,
        window: d.u32()? as usize,
        k: d.u32()? as usize,
        alpha0: d.f64()?,
        margin: d.f64()?,
        margin_intra: d.f64()?,
        min_count: d.u64()?,
        epochs_per_mstep: d.u32()? as usize,
        tree_passes_per_mstep: d.u32()? as usize,
        threads: d.u32()? as usize,
        seed: d.u64()?,
        subsample: Some(d.f64()?).filter(|&s| s > 0.0),
    };
    config
        .validate()
        .map_err(|e| Error::Corrupted(format!("stored config invalid: {e}")))?;
    let t = d.u32()? as usize;

    let n_vocab = d.len()?;
    let mut entries = Vec::with_capacity(n_vocab);
    for _ in 0..n_vocab {
        let tok = d.str()?;
        entries.push((tok, d.u64()?));
    }
    let vocab = Vocabulary::from_counts(entries);
    if vocab.tokens().len() != n_vocab || (0..n_vocab).any(|i| vocab.id(&vocab.tokens()[i]) != Some(i as u32)) {
        return Err(Error::Corrupted("duplicate vocabulary tokens".into()));
    }
    let n_docs = d.len()?;
    let doc_ids = (0..n_docs).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;

    let n_nodes = d.len()?;
    let mut edges = String::new();
    let mut names = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let name = d.str()?;
        let parent = d.u32()?;
        if parent != u32::MAX {
            let pname: &String = names
                .get(parent as usize)
                .ok_or_else(|| Error::Corrupted("parent id out of order".into()))?;
            edges.push_str(&format!("{pname}\t{name}\n"));
        } else if name != ROOT_NAME {
            return Err(Error::Corrupted(format!("parentless node {name:?}")));
        }
        names.push(name);
    }
    let taxonomy = Taxonomy::parse(&edges, &vocab).map_err(|e| Error::Corrupted(format!("taxonomy: {e}")))?;
    if taxonomy.nodes().iter().map(|n| &n.name).ne(names.iter()) {
        return Err(Error::Corrupted("taxonomy node order".into()));
    }
    let kappa = (0..n_nodes).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
    let mut rep_terms = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let n = d.len()?;
        let terms = (0..n).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;
        if terms.iter().any(|&t| t as usize >= vocab.len()) {
            return Err(Error::Corrupted("representative term out of range".into()));
        }
        rep_terms.push(terms);
    }
    let dim = config.dim;
    let u = d.matrix(Role::CenterWord, dim)?;
    let v = d.matrix(Role::ContextWord, dim)?;
    let dm = d.matrix(Role::Document, dim)?;
    let c = d.matrix(Role::Category, dim)?;
    if u.rows() != vocab.len() || v.rows() != vocab.len() || c.rows() != n_nodes || dm.rows() != n_docs.max(1) {
        return Err(Error::Corrupted("matrix row counts disagree with header".into()));
    }
    if !d.buf.is_empty() {
        return Err(Error::Corrupted(format!("{} trailing bytes", d.buf.len())));
    }
    Ok(ModelState {
        config,
        vocab,
        doc_ids,
        taxonomy,
        u,
        v,
        d: dm,
        c,
        kappa,
        rep_terms,
        t,
    })
}

pub fn write_model_bin(state: &ModelState, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_state(state, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_model_bin(path: &Path) -> Result<ModelState> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_state(&buf)
}

/// Writes `model.bin` plus the text exports (`u.txt`, `v.txt`, `doc.txt`,
/// `cat.txt`, `meta.tsv`) into `dir`, creating it if needed.
pub fn save_model(state: &ModelState, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_model_bin(state, &dir.join(MODEL_FILE))?;
    export_embeddings(state, dir)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<ModelState> {
    read_model_bin(&dir.as_ref().join(MODEL_FILE))
}

// ---------------------------------------------------------------------------
// text export

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{exp}")
    }
}

/// Text format: header `N p`, then `label v1 … vp` per row.
pub fn write_text_embeddings<W: Write>(matrix: &EmbeddingMatrix, labels: &[String], mut out: W) -> std::io::Result<()> {
    debug_assert_eq!(labels.len(), matrix.rows());
    writeln!(out, "{} {}", matrix.rows(), matrix.dim())?;
    let mut row = vec![0.0; matrix.dim()];
    for (r, label) in labels.iter().enumerate() {
        matrix.read_row(r, &mut row);
        write!(out, "{label}")?;
        for x in &row {
            write!(out, " {}", format_sig6(*x))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Reads the text format back as `(labels, rows)`.
pub fn read_text_embeddings(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |line: usize, message: &str| Error::Format {
        path: path.to_owned(),
        line,
        message: message.to_string(),
    };
    let header = lines
        .next()
        .ok_or_else(|| bad(1, "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let mut hdr = header.split(' ').map(str::parse::<usize>);
    let (Some(Ok(n)), Some(Ok(p)), None) = (hdr.next(), hdr.next(), hdr.next()) else {
        return Err(bad(1, "header must be `N p`"));
    };
    let mut labels = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split(' ');
        let label = fields.next().unwrap_or("").to_string();
        let row = fields
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(i + 2, "non-numeric coordinate"))?;
        if row.len() != p {
            return Err(bad(i + 2, "wrong number of coordinates"));
        }
        labels.push(label);
        rows.push(row);
    }
    if rows.len() != n {
        return Err(bad(n + 1, "row count disagrees with header"));
    }
    Ok((labels, rows))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes the human-readable exports and `meta.tsv` into `dir`.
pub fn export_embeddings(state: &ModelState, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let words = state.vocab.tokens();
    let docs: Vec<String> = if state.doc_ids.is_empty() {
        vec!["_".to_string()]
    } else {
        state.doc_ids.iter().map(|id| id.to_string()).collect()
    };
    let cats: Vec<String> = state.taxonomy.nodes().iter().map(|n| n.name.clone()).collect();
    let exports: [(&str, &EmbeddingMatrix, &[String]); 4] = [
        ("u.txt", &state.u, words),
        ("v.txt", &state.v, words),
        ("doc.txt", &state.d, &docs),
        ("cat.txt", &state.c, &cats),
    ];
    for (name, matrix, labels) in exports {
        write_file(&dir.join(name), |w| write_text_embeddings(matrix, labels, w))?;
    }
    write_file(&dir.join("meta.tsv"), |w| write_meta(state, w))
}

fn write_meta<W: Write>(state: &ModelState, w: &mut W) -> std::io::Result<()> {
    let cfg = &state.config;
    writeln!(w, "key\tvalue")?;
    for (k, v) in cfg.as_pairs() {
        writeln!(w, "{k}\t{v}")?;
    }
    writeln!(w, "iteration\t{}", state.t)?;
    writeln!(w, "vocab_size\t{}", state.vocab.len())?;
    writeln!(w, "documents\t{}", state.doc_ids.len())?;
    for (node, kappa) in state.taxonomy.nodes().iter().zip(&state.kappa).skip(1) {
        writeln!(w, "kappa:{}\t{}", node.name, kappa)?;
    }
    Ok(())
}
