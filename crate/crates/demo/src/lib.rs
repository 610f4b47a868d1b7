//! Browser bindings for three small demonstrations: vMF density curves,
//! tree embedding on the unit circle, and vMF classification of a point.
//!
//! The plain Rust functions carry the logic; the `#[wasm_bindgen]` wrappers
//! only translate errors.

use josh::corpus::Vocabulary;
use josh::geometry::log_vmf_normalizer;
use josh::miner::{Classifier, ClassifyMode};
use josh::model::{init_model, ModelState};
use josh::taxonomy::{LevelMargins, Taxonomy};
use josh::trainer::{tree_passes, TrainConfig};
use wasm_bindgen::prelude::*;

const DEMO_TREE: &str = "\
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

/// `log f(x; μ, κ)` at `samples` evenly spaced angles between `x` and `μ`,
/// from 0 to π inclusive.
pub fn density_curve(dim: usize, kappa: f64, samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let log_norm = log_vmf_normalizer(dim, kappa).map_err(|e| e.to_string())?;
    Ok((0..samples)
        .map(|i| {
            let angle = std::f64::consts::PI * i as f64 / (samples - 1) as f64;
            log_norm + kappa * angle.cos()
        })
        .collect())
}

#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve_js(dim: usize, kappa: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    density_curve(dim, kappa, samples).map_err(|e| JsError::new(&e))
}

/// A nine-category tree embedded on the unit circle.
#[wasm_bindgen]
pub struct TreeDemo {
    state: ModelState,
}

impl TreeDemo {
    pub fn create(seed: u32) -> Result<TreeDemo, String> {
        let names = DEMO_TREE.split(['\t', '\n']).filter(|s| !s.is_empty() && *s != "ROOT");
        let mut counts: Vec<(String, u64)> = names.map(|n| (n.to_string(), 1)).collect();
        counts.sort();
        counts.dedup();
        let vocab = Vocabulary::from_counts(counts);
        let taxonomy = Taxonomy::parse(DEMO_TREE, &vocab).map_err(|e| e.to_string())?;
        let config = TrainConfig { dim: 2, ..TrainConfig::default() };
        let state = init_model(&vocab, &[], &taxonomy, &config, u64::from(seed)).map_err(|e| e.to_string())?;
        Ok(TreeDemo { state })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn classify_angle(&self, angle: f64, leaves_only: bool) -> Result<Vec<f64>, String> {
        let mode = if leaves_only { ClassifyMode::Leaves } else { ClassifyMode::AllNodes };
        let classifier = Classifier::new(&self.state, mode).map_err(|e| e.to_string())?;
        let label = classifier.classify(0, &[angle.cos(), angle.sin()]);
        let mut out = label.log_densities;
        out.push(label.predicted as f64);
        Ok(out)
    }
}

#[wasm_bindgen]
impl TreeDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<TreeDemo, JsError> {
        TreeDemo::create(seed).map_err(|e| JsError::new(&e))
    }

    /// Node names in node-id order, ROOT first.
    pub fn names(&self) -> Vec<String> {
        self.state.taxonomy.nodes().iter().map(|n| n.name.clone()).collect()
    }

    /// Parent node id per node; −1 for ROOT.
    pub fn parents(&self) -> Vec<i32> {
        self.state
            .taxonomy
            .nodes()
            .iter()
            .map(|n| n.parent.map_or(-1, |p| p as i32))
            .collect()
    }

    /// Center angle of every node in radians.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.state.taxonomy.len())
            .map(|n| {
                let c = self.state.c.row(n);
                c[1].atan2(c[0])
            })
            .collect()
    }

    /// Runs `passes` sweeps of the tree hinge with one margin for every
    /// level; returns the fraction of active hinges.
    pub fn step(&mut self, passes: usize, margin: f64, alpha: f64) -> f64 {
        let margins: LevelMargins = (0..=self.state.taxonomy.depth()).map(|l| (l, margin)).collect();
        let (active, total) = tree_passes(&self.state, &margins, passes, alpha);
        if total == 0 {
            0.0
        } else {
            active as f64 / total as f64
        }
    }

    #[wasm_bindgen(js_name = setKappa)]
    pub fn set_kappa(&mut self, node: usize, kappa: f64) -> Result<(), JsError> {
        if node == 0 || node >= self.state.kappa.len() || !(kappa.is_finite() && kappa > 0.0) {
            return Err(JsError::new("node must be a category and kappa positive"));
        }
        self.state.kappa[node] = kappa;
        Ok(())
    }

    /// Log density of the point at `angle` under every node (−∞ outside the
    /// candidate set), followed by the winning node id.
    pub fn classify(&self, angle: f64, leaves_only: bool) -> Result<Vec<f64>, JsError> {
        self.classify_angle(angle, leaves_only).map_err(|e| JsError::new(&e))
    }
}
