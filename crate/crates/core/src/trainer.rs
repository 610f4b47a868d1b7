//! The EM loop: E-steps assign the top-`t` words to each category, M-steps
//! run Riemannian SGD over the text hinge, the category attraction term and
//! the tree hinge.
//!
//! Every update follows the same recipe: take the Euclidean gradient of the
//! active term, project it onto the tangent space at the parameter, and
//! retract `θ + α·grad` back onto the sphere.
//!
//! Gradients of the text hinge `v·u_w + u_w·d − v·u_neg − u_neg·d − m`:
//!
//! ```text
//! ∂/∂u_w   =  v + d        ∂/∂v = u_w − u_neg
//! ∂/∂u_neg = −(v + d)      ∂/∂d = u_w − u_neg
//! ```
//!
//! Gradients of the tree hinge `c_i·c_r − c_i·c_j − m_inter`:
//!
//! ```text
//! ∂/∂c_i = c_r − c_j       ∂/∂c_r = c_i       ∂/∂c_j = −c_i
//! ```
//!
//! The category term `log n_p(κ) + κ u_w·c` is stepped along `c` (for `u_w`)
//! and `u_w` (for `c`), i.e. its gradient with κ divided out. κ itself is
//! re-estimated after each E-step.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::corpus::{self, Document, NegativeSampler, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::{dot, log_vmf_normalizer, project_in_place, retract_in_place};
use crate::miner::{mine_topics, TopicResult};
use crate::model::{init_model, EmbeddingMatrix, ModelState};
use crate::taxonomy::{compute_level_margins, parse_taxonomy, LevelMargins, Taxonomy};

/// Learning-rate floor as a fraction of `alpha0`.
const MIN_ALPHA_FRACTION: f64 = 1e-4;
const RBAR_CLAMP: f64 = 1e-4;
const KAPPA_MIN: f64 = 1.0;
const KAPPA_MAX: f64 = 1e5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Embedding dimension p.
    pub dim: usize,
    /// Context window h.
    pub window: usize,
    /// Terms per category K; also the number of EM iterations.
    pub k: usize,
    pub alpha0: f64,
    /// Text hinge margin m.
    pub margin: f64,
    /// Intra-category cosine threshold.
    pub margin_intra: f64,
    pub min_count: u64,
    pub epochs_per_mstep: usize,
    pub tree_passes_per_mstep: usize,
    pub threads: usize,
    pub seed: u64,
    /// Frequent-word subsampling threshold; off when `None`.
    pub subsample: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 5,
            k: 5,
            alpha0: 0.025,
            margin: 0.25,
            margin_intra: 0.9,
            min_count: 5,
            epochs_per_mstep: 2,
            tree_passes_per_mstep: 50,
            threads: 1,
            seed: 42,
            subsample: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dim < 2 {
            return fail(format!("dim must be >= 2, got {}", self.dim));
        }
        if self.window < 1 {
            return fail("window must be >= 1".into());
        }
        if self.k < 1 {
            return fail("k must be >= 1".into());
        }
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return fail(format!("alpha must be > 0, got {}", self.alpha0));
        }
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return fail(format!("margin must lie in (0, 2), got {}", self.margin));
        }
        if !(self.margin_intra > 0.0 && self.margin_intra < 1.0) {
            return fail(format!("margin-intra must lie in (0, 1), got {}", self.margin_intra));
        }
        if self.min_count < 1 {
            return fail("min-count must be >= 1".into());
        }
        if self.threads < 1 {
            return fail("threads must be >= 1".into());
        }
        if let Some(s) = self.subsample {
            if !(s > 0.0 && s < 1.0) {
                return fail(format!("subsample threshold must lie in (0, 1), got {s}"));
            }
        }
        Ok(())
    }

    pub fn as_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dim", self.dim.to_string()),
            ("window", self.window.to_string()),
            ("k", self.k.to_string()),
            ("alpha", self.alpha0.to_string()),
            ("margin", self.margin.to_string()),
            ("margin_intra", self.margin_intra.to_string()),
            ("min_count", self.min_count.to_string()),
            ("epochs_per_step", self.epochs_per_mstep.to_string()),
            ("tree_passes", self.tree_passes_per_mstep.to_string()),
            ("threads", self.threads.to_string()),
            ("seed", self.seed.to_string()),
            ("subsample", self.subsample.map_or("off".into(), |s| s.to_string())),
        ]
    }
}

/// One hinge `min(0, positive − negative − margin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginTerm {
    pub positive: f64,
    pub negative: f64,
    pub margin: f64,
}

impl MarginTerm {
    pub fn active(&self) -> bool {
        self.positive - self.negative < self.margin
    }

    /// `min(0, positive − negative − margin)`.
    pub fn value(&self) -> f64 {
        (self.positive - self.negative - self.margin).min(0.0)
    }
}

pub fn text_margin_term(u_w: &[f64], u_neg: &[f64], v_ctx: &[f64], d: &[f64], margin: f64) -> MarginTerm {
    MarginTerm {
        positive: dot(v_ctx, u_w) + dot(u_w, d),
        negative: dot(v_ctx, u_neg) + dot(u_neg, d),
        margin,
    }
}

pub fn tree_margin_term(c_i: &[f64], c_r: &[f64], c_j: &[f64], margin: f64) -> MarginTerm {
    MarginTerm {
        positive: dot(c_i, c_r),
        negative: dot(c_i, c_j),
        margin,
    }
}

/// Riemannian gradients of the active text hinge w.r.t.
/// `(u_w, u_neg, v_ctx, d)`.
pub fn text_gradients(u_w: &[f64], u_neg: &[f64], v_ctx: &[f64], d: &[f64]) -> [Vec<f64>; 4] {
    let mut g_u: Vec<f64> = v_ctx.iter().zip(d).map(|(a, b)| a + b).collect();
    let mut g_neg: Vec<f64> = g_u.iter().map(|x| -x).collect();
    let mut g_v: Vec<f64> = u_w.iter().zip(u_neg).map(|(a, b)| a - b).collect();
    let mut g_d = g_v.clone();
    project_in_place(u_w, &mut g_u);
    project_in_place(u_neg, &mut g_neg);
    project_in_place(v_ctx, &mut g_v);
    project_in_place(d, &mut g_d);
    [g_u, g_neg, g_v, g_d]
}

/// Riemannian gradients of `κ u_w·c` w.r.t. `(u_w, c)`.
pub fn category_gradients(u_w: &[f64], c: &[f64], kappa: f64) -> [Vec<f64>; 2] {
    let mut g_u: Vec<f64> = c.iter().map(|x| kappa * x).collect();
    let mut g_c: Vec<f64> = u_w.iter().map(|x| kappa * x).collect();
    project_in_place(u_w, &mut g_u);
    project_in_place(c, &mut g_c);
    [g_u, g_c]
}

/// Riemannian gradients of the active tree hinge w.r.t. `(c_i, c_r, c_j)`.
pub fn tree_gradients(c_i: &[f64], c_r: &[f64], c_j: &[f64]) -> [Vec<f64>; 3] {
    let mut g_i: Vec<f64> = c_r.iter().zip(c_j).map(|(a, b)| a - b).collect();
    let mut g_r = c_i.to_vec();
    let mut g_j: Vec<f64> = c_i.iter().map(|x| -x).collect();
    project_in_place(c_i, &mut g_i);
    project_in_place(c_r, &mut g_r);
    project_in_place(c_j, &mut g_j);
    [g_i, g_r, g_j]
}

/// Per-worker scratch rows.
pub(crate) struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    ga: Vec<f64>,
    gb: Vec<f64>,
    gc: Vec<f64>,
    gd: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(dim: usize) -> Self {
        let z = || vec![0.0; dim];
        Workspace {
            a: z(),
            b: z(),
            c: z(),
            d: z(),
            ga: z(),
            gb: z(),
            gc: z(),
            gd: z(),
        }
    }
}

/// Projects `grad` at `x`, scales by `alpha` and retracts. A degenerate step
/// leaves `x` untouched.
#[inline]
fn riemannian_update(x: &mut [f64], grad: &mut [f64], alpha: f64) {
    project_in_place(x, grad);
    grad.iter_mut().for_each(|g| *g *= alpha);
    let _ = retract_in_place(x, grad);
}

#[inline]
fn text_step_in(
    ws: &mut Workspace,
    state: &ModelState,
    center: TokenId,
    context: TokenId,
    doc_row: usize,
    negative: TokenId,
    alpha: f64,
) -> bool {
    let Workspace { a: u_w, b: u_neg, c: v, d, ga, gb, gc, gd } = ws;
    state.u.read_row(center as usize, u_w);
    state.u.read_row(negative as usize, u_neg);
    state.v.read_row(context as usize, v);
    state.d.read_row(doc_row, d);
    if !text_margin_term(u_w, u_neg, v, d, state.config.margin).active() {
        return false;
    }
    for k in 0..u_w.len() {
        ga[k] = v[k] + d[k];
        gb[k] = -ga[k];
        gc[k] = u_w[k] - u_neg[k];
        gd[k] = gc[k];
    }
    riemannian_update(u_w, ga, alpha);
    riemannian_update(u_neg, gb, alpha);
    riemannian_update(v, gc, alpha);
    riemannian_update(d, gd, alpha);
    state.u.write_row(center as usize, u_w);
    state.u.write_row(negative as usize, u_neg);
    state.v.write_row(context as usize, v);
    state.d.write_row(doc_row, d);
    true
}

#[inline]
fn category_step_in(ws: &mut Workspace, state: &ModelState, node: usize, token: TokenId, alpha: f64) -> bool {
    let Workspace { a: u_w, b: c, ga, gb, .. } = ws;
    state.u.read_row(token as usize, u_w);
    state.c.read_row(node, c);
    if dot(u_w, c) >= state.config.margin_intra {
        return false;
    }
    ga.copy_from_slice(c);
    gb.copy_from_slice(u_w);
    riemannian_update(u_w, ga, alpha);
    riemannian_update(c, gb, alpha);
    state.u.write_row(token as usize, u_w);
    state.c.write_row(node, c);
    true
}

#[inline]
fn tree_step_in(ws: &mut Workspace, centers: &EmbeddingMatrix, root: usize, i: usize, j: usize, margin: f64, alpha: f64) -> bool {
    let Workspace { a: c_i, b: c_r, c: c_j, ga, gb, gc, .. } = ws;
    centers.read_row(i, c_i);
    centers.read_row(root, c_r);
    centers.read_row(j, c_j);
    if !tree_margin_term(c_i, c_r, c_j, margin).active() {
        return false;
    }
    for k in 0..c_i.len() {
        ga[k] = c_r[k] - c_j[k];
        gb[k] = c_i[k];
        gc[k] = -c_i[k];
    }
    riemannian_update(c_i, ga, alpha);
    riemannian_update(c_r, gb, alpha);
    riemannian_update(c_j, gc, alpha);
    centers.write_row(i, c_i);
    centers.write_row(root, c_r);
    centers.write_row(j, c_j);
    true
}

/// One update on the text hinge for a `(center, context, doc)` tuple and its
/// negative. `doc_row` indexes the document matrix. Returns whether the
/// hinge was active.
pub fn text_step(state: &ModelState, center: TokenId, context: TokenId, doc_row: usize, negative: TokenId, alpha: f64) -> bool {
    text_step_in(&mut Workspace::new(state.dim()), state, center, context, doc_row, negative, alpha)
}

/// Pulls `token` and the center of `node` together while their cosine is
/// below the intra-category margin.
pub fn category_step(state: &ModelState, node: usize, token: TokenId, alpha: f64) -> bool {
    category_step_in(&mut Workspace::new(state.dim()), state, node, token, alpha)
}

/// Tree hinge update for the ordered sibling pair `(i, j)` under `root`.
pub fn tree_step(state: &ModelState, root: usize, pair: (usize, usize), margin: f64, alpha: f64) -> bool {
    assert_ne!(pair.0, pair.1, "sibling pairs are distinct");
    tree_step_in(&mut Workspace::new(state.dim()), &state.c, root, pair.0, pair.1, margin, alpha)
}

/// The `count` highest-density vocabulary tokens under the vMF of `node`,
/// best first, with their log densities. Ties go to the smaller token id.
pub fn top_terms(state: &ModelState, node: usize, count: usize) -> Vec<(TokenId, f64)> {
    let kappa = state.kappa[node];
    let log_norm = log_vmf_normalizer(state.dim(), kappa).expect("kappa in range");
    let center = state.c.row(node);
    let mut row = vec![0.0; state.dim()];
    let mut scored: Vec<(TokenId, f64)> = (0..state.vocab.len())
        .map(|w| {
            state.u.read_row(w, &mut row);
            (w as TokenId, log_norm + kappa * dot(&row, &center))
        })
        .collect();
    let by_rank = |a: &(TokenId, f64), b: &(TokenId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let count = count.min(scored.len());
    if count == 0 {
        return Vec::new();
    }
    if count < scored.len() {
        scored.select_nth_unstable_by(count - 1, by_rank);
        scored.truncate(count);
    }
    scored.sort_unstable_by(by_rank);
    scored
}

/// E-step for iteration `t`: every category keeps its top-`t` tokens.
pub fn e_step(state: &mut ModelState, t: usize) {
    for node in state.taxonomy.categories() {
        state.rep_terms[node] = top_terms(state, node, t).into_iter().map(|(w, _)| w).collect();
    }
    state.t = t;
}

/// Mean-resultant concentration estimate `r̄(p − r̄²)/(1 − r̄²)`, with `r̄`
/// clamped to `[1e-4, 1 − 1e-4]` and the result to `[1, 1e5]`.
pub fn estimate_kappa(mean_cosine: f64, dim: usize) -> f64 {
    let r = mean_cosine.clamp(RBAR_CLAMP, 1.0 - RBAR_CLAMP);
    let p = dim as f64;
    (r * (p - r * r) / (1.0 - r * r)).clamp(KAPPA_MIN, KAPPA_MAX)
}

/// Re-estimates κ of every category from its representative terms.
pub fn update_kappa(state: &mut ModelState) {
    let mut row = vec![0.0; state.dim()];
    for node in state.taxonomy.categories() {
        let terms = &state.rep_terms[node];
        if terms.is_empty() {
            continue;
        }
        let center = state.c.row(node);
        let mean = terms
            .iter()
            .map(|&w| {
                state.u.read_row(w as usize, &mut row);
                dot(&row, &center)
            })
            .sum::<f64>()
            / terms.len() as f64;
        state.kappa[node] = estimate_kappa(mean, state.dim());
    }
}

/// Linear decay from `alpha0` to `alpha0 · 1e-4` over the whole run,
/// measured in processed center tokens.
#[derive(Debug)]
pub struct LearningRate {
    alpha0: f64,
    total: u64,
    done: AtomicU64,
}

impl LearningRate {
    pub fn new(alpha0: f64, total_tokens: u64) -> Self {
        LearningRate {
            alpha0,
            total: total_tokens.max(1),
            done: AtomicU64::new(0),
        }
    }

    pub fn constant(alpha: f64) -> Self {
        LearningRate {
            alpha0: alpha,
            total: u64::MAX,
            done: AtomicU64::new(0),
        }
    }

    pub fn current(&self) -> f64 {
        let progress = self.done.load(Ordering::Relaxed) as f64 / self.total as f64;
        self.alpha0 * (1.0 - progress).max(MIN_ALPHA_FRACTION)
    }

    fn advance(&self, tokens: u64) {
        self.done.fetch_add(tokens, Ordering::Relaxed);
    }
}

/// Per-epoch progress, printed as one TSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub t: usize,
    pub epoch: usize,
    pub alpha: f64,
    /// Fraction of text tuples whose hinge was active.
    pub active_fraction: f64,
    pub tree_active_fraction: f64,
    pub mean_category_cosine: f64,
    pub margins: Vec<(usize, f64)>,
}

impl EpochReport {
    pub const TSV_HEADER: &'static str = "t\tepoch\talpha\tactive_fraction\ttree_active_fraction\tmean_category_cosine\tm_inter";

    pub fn to_tsv(&self) -> String {
        let margins: Vec<String> = self.margins.iter().map(|(l, m)| format!("L{l}={m:.6}")).collect();
        format!(
            "{}\t{}\t{:.6e}\t{:.6}\t{:.6}\t{:.6}\t{}",
            self.t,
            self.epoch,
            self.alpha,
            self.active_fraction,
            self.tree_active_fraction,
            self.mean_category_cosine,
            if margins.is_empty() { "-".to_string() } else { margins.join(",") }
        )
    }
}

/// Mean cosine between each category center and its representative terms.
pub fn mean_category_cosine(state: &ModelState) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for node in state.taxonomy.categories() {
        let c = state.c.row(node);
        for &w in &state.rep_terms[node] {
            sum += dot(&state.u.row(w as usize), &c);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mutable training context shared by the M-steps of one run.
pub struct Session {
    pub samplers: Vec<NegativeSampler>,
    pub schedule: LearningRate,
}

impl Session {
    /// One sampler per worker seeded `seed + worker`, and a schedule spanning
    /// `msteps` M-steps.
    pub fn new(config: &TrainConfig, vocab: &Vocabulary, docs: &[Document], msteps: usize) -> Self {
        let tokens: u64 = docs.iter().map(|d| d.token_ids.len() as u64).sum();
        let total = tokens * (config.epochs_per_mstep * msteps) as u64;
        Session {
            samplers: (0..config.threads)
                .map(|w| NegativeSampler::new(vocab, config.seed.wrapping_add(w as u64)))
                .collect(),
            schedule: LearningRate::new(config.alpha0, total),
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct StepCounts {
    active: u64,
    total: u64,
}

impl StepCounts {
    fn add(&mut self, other: StepCounts) {
        self.active += other.active;
        self.total += other.total;
    }

    fn fraction(self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.active as f64 / self.total as f64
        }
    }
}

/// For each token, the categories that currently list it as representative.
fn categories_by_token(state: &ModelState) -> Vec<Vec<usize>> {
    let mut index = vec![Vec::new(); state.vocab.len()];
    for node in state.taxonomy.categories() {
        for &w in &state.rep_terms[node] {
            index[w as usize].push(node);
        }
    }
    index
}

fn train_shard(
    state: &ModelState,
    shard: &[Document],
    first_row: usize,
    sampler: &mut NegativeSampler,
    schedule: &LearningRate,
    by_token: &[Vec<usize>],
) -> StepCounts {
    let mut ws = Workspace::new(state.dim());
    let mut counts = StepCounts::default();
    let h = state.config.window;
    let mut kept: Vec<TokenId> = Vec::new();
    for (offset, doc) in shard.iter().enumerate() {
        let row = first_row + offset;
        let toks: &[TokenId] = match state.config.subsample {
            None => &doc.token_ids,
            Some(threshold) => {
                kept.clear();
                for &w in &doc.token_ids {
                    let keep = corpus::keep_probability(state.vocab.count(w), state.vocab.total(), threshold);
                    if keep >= 1.0 || sampler.rng().random::<f64>() < keep {
                        kept.push(w);
                    }
                }
                &kept
            }
        };
        let n = toks.len();
        for j in 0..n {
            let alpha = schedule.current();
            let center = toks[j];
            let (lo, hi) = (j.saturating_sub(h), (j + h).min(n - 1));
            for (i, &context) in toks.iter().enumerate().take(hi + 1).skip(lo) {
                if i == j {
                    continue;
                }
                let negative = sampler.sample_negative(center);
                counts.total += 1;
                if text_step_in(&mut ws, state, center, context, row, negative, alpha) {
                    counts.active += 1;
                }
            }
            for &node in &by_token[center as usize] {
                category_step_in(&mut ws, state, node, center, alpha);
            }
            schedule.advance(1);
        }
        // dropped tokens still count towards the decay schedule
        schedule.advance((doc.token_ids.len() - n) as u64);
    }
    counts
}

/// One pass over the corpus. Documents are split into contiguous shards, one
/// per sampler; with more than one shard the workers update shared rows
/// without synchronization.
fn corpus_epoch(state: &ModelState, docs: &[Document], session: &mut Session, by_token: &[Vec<usize>]) -> StepCounts {
    let workers = session.samplers.len().min(docs.len()).max(1);
    if workers == 1 {
        return train_shard(state, docs, 0, &mut session.samplers[0], &session.schedule, by_token);
    }
    let shard_len = docs.len().div_ceil(workers);
    let schedule = &session.schedule;
    std::thread::scope(|scope| {
        let handles: Vec<_> = docs
            .chunks(shard_len)
            .zip(session.samplers.iter_mut())
            .enumerate()
            .map(|(w, (shard, sampler))| {
                scope.spawn(move || train_shard(state, shard, w * shard_len, sampler, schedule, by_token))
            })
            .collect();
        let mut total = StepCounts::default();
        for h in handles {
            total.add(h.join().expect("training worker panicked"));
        }
        total
    })
}

/// `passes` sweeps of the tree hinge over every local tree and ordered
/// sibling pair, with margins held fixed.
pub fn tree_passes(state: &ModelState, margins: &LevelMargins, passes: usize, alpha: f64) -> (u64, u64) {
    let mut ws = Workspace::new(state.dim());
    let local_trees = state.taxonomy.local_trees();
    let (mut active, mut total) = (0, 0);
    for _ in 0..passes {
        for lt in &local_trees {
            let margin = margins.get(state.taxonomy.node(lt.root).level);
            for (i, j) in lt.sibling_pairs() {
                total += 1;
                if tree_step_in(&mut ws, &state.c, lt.root, i, j, margin, alpha) {
                    active += 1;
                }
            }
        }
    }
    (active, total)
}

/// Level margins from the current category centers.
pub fn current_margins(state: &ModelState) -> LevelMargins {
    compute_level_margins(&state.taxonomy, &state.c.to_rows())
}

/// M-step for iteration `t`. Margins are computed once up front and frozen;
/// each corpus epoch is followed by a category sweep and the tree passes.
pub fn m_step(
    state: &mut ModelState,
    docs: &[Document],
    t: usize,
    session: &mut Session,
    observer: &mut dyn FnMut(&EpochReport),
) -> Vec<EpochReport> {
    let margins = current_margins(state);
    let by_token = categories_by_token(state);
    let mut reports = Vec::with_capacity(state.config.epochs_per_mstep);
    for epoch in 0..state.config.epochs_per_mstep {
        let counts = corpus_epoch(state, docs, session, &by_token);
        let alpha = session.schedule.current();
        let (active, total) = tree_passes(state, &margins, state.config.tree_passes_per_mstep, alpha);
        let report = EpochReport {
            t,
            epoch: epoch + 1,
            alpha,
            active_fraction: counts.fraction(),
            tree_active_fraction: StepCounts { active, total }.fraction(),
            mean_category_cosine: mean_category_cosine(state),
            margins: margins.iter().collect(),
        };
        observer(&report);
        reports.push(report);
    }
    state.t = t;
    reports
}

/// Full EM schedule on already-loaded inputs: a warm-up M-step with each
/// category represented by its name, then K iterations of
/// E-step, κ update and M-step for `t = 2..=K+1`.
pub fn train(
    config: &TrainConfig,
    vocab: &Vocabulary,
    docs: &[Document],
    taxonomy: &Taxonomy,
    observer: &mut dyn FnMut(&EpochReport),
) -> Result<ModelState> {
    config.validate()?;
    if taxonomy.is_empty() {
        return Err(Error::EmptyTaxonomy);
    }
    if vocab.len() < 2 {
        return Err(Error::Config("vocabulary needs at least two tokens".into()));
    }
    let mut state = init_model(vocab, docs, taxonomy, config, config.seed)?;
    let mut session = Session::new(config, vocab, docs, config.k + 1);
    m_step(&mut state, docs, 1, &mut session, observer);
    for t in 2..=config.k + 1 {
        e_step(&mut state, t);
        update_kappa(&mut state);
        m_step(&mut state, docs, t, &mut session, observer);
    }
    Ok(state)
}

/// Loads the corpus and category tree, trains, and mines the topics.
/// Progress goes to standard error as TSV.
pub fn run(config: &TrainConfig, corpus_path: impl AsRef<Path>, taxonomy_path: impl AsRef<Path>) -> Result<(Vec<TopicResult>, ModelState)> {
    eprintln!("{}", EpochReport::TSV_HEADER);
    run_with(config, corpus_path, taxonomy_path, &mut |r| eprintln!("{}", r.to_tsv()))
}

pub fn run_with(
    config: &TrainConfig,
    corpus_path: impl AsRef<Path>,
    taxonomy_path: impl AsRef<Path>,
    observer: &mut dyn FnMut(&EpochReport),
) -> Result<(Vec<TopicResult>, ModelState)> {
    config.validate()?;
    let vocab = corpus::build_vocabulary(&corpus_path, config.min_count)?;
    let docs = corpus::load_documents(&corpus_path, &vocab)?;
    let taxonomy = parse_taxonomy(taxonomy_path, &vocab)?;
    log::info!(
        "vocabulary {} tokens, {} documents, {} categories",
        vocab.len(),
        docs.len(),
        taxonomy.len() - 1
    );
    let state = train(config, &vocab, &docs, &taxonomy, observer)?;
    Ok((mine_topics(&state), state))
}

/// Σ over all text tuples of the hinge value, drawing one negative per tuple
/// from `sampler` in the same order an epoch would.
pub fn text_objective(state: &ModelState, docs: &[Document], sampler: &mut NegativeSampler) -> f64 {
    let mut ws = Workspace::new(state.dim());
    let mut total = 0.0;
    for (row, doc) in docs.iter().enumerate() {
        for (center, context, _) in corpus::context_pairs(doc, state.config.window) {
            let negative = sampler.sample_negative(center);
            state.u.read_row(center as usize, &mut ws.a);
            state.u.read_row(negative as usize, &mut ws.b);
            state.v.read_row(context as usize, &mut ws.c);
            state.d.read_row(row, &mut ws.d);
            total += text_margin_term(&ws.a, &ws.b, &ws.c, &ws.d, state.config.margin).value();
        }
    }
    total
}

/// Σ over categories and their terms of `(log n_p(κ) + κ u·c)·1(u·c < m_intra)`.
pub fn category_objective(state: &ModelState) -> f64 {
    let mut total = 0.0;
    for node in state.taxonomy.categories() {
        let kappa = state.kappa[node];
        let log_norm = log_vmf_normalizer(state.dim(), kappa).expect("kappa in range");
        let c = state.c.row(node);
        for &w in &state.rep_terms[node] {
            let cos = dot(&state.u.row(w as usize), &c);
            if cos < state.config.margin_intra {
                total += log_norm + kappa * cos;
            }
        }
    }
    total
}

/// Σ over local trees and ordered sibling pairs of the tree hinge value.
pub fn tree_objective(state: &ModelState, margins: &LevelMargins) -> f64 {
    let mut total = 0.0;
    for lt in state.taxonomy.local_trees() {
        let margin = margins.get(state.taxonomy.node(lt.root).level);
        let cr = state.c.row(lt.root);
        for (i, j) in lt.sibling_pairs() {
            total += tree_margin_term(&state.c.row(i), &cr, &state.c.row(j), margin).value();
        }
    }
    total
}
