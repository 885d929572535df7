//! Linear support vector machine trained with sequential minimal optimization.
//!
//! The trainer follows Platt's outer loop: sweeps over all examples
//! alternate with sweeps over the non-bound ones (`0 < alpha < C`). For every
//! example that violates the KKT conditions a partner is searched starting at
//! a random offset, first among the non-bound examples and then among all of
//! them. Because the kernel is linear the weight vector is kept explicitly,
//! so errors are recomputed from `w` instead of being cached.
//!
//! The decision function is `w . x - b`.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureIndex, FeatureVector};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Alphas closer than this to a bound are snapped onto it.
const ALPHA_SNAP: f64 = 1e-8;
const STEP_EPS: f64 = 1e-12;
/// Hard cap on outer sweeps; reaching it ends training regardless of KKT state.
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

/// Which dataset a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistanceTag {
    #[serde(rename = "d0")]
    D0,
    #[serde(rename = "d1")]
    D1,
    #[serde(rename = "d2")]
    D2,
    #[serde(rename = "all")]
    All,
}

impl DistanceTag {
    pub const ALL_TAGS: [DistanceTag; 4] = [DistanceTag::D0, DistanceTag::D1, DistanceTag::D2, DistanceTag::All];

    pub fn for_distance(distance: usize) -> Option<DistanceTag> {
        match distance {
            0 => Some(DistanceTag::D0),
            1 => Some(DistanceTag::D1),
            2 => Some(DistanceTag::D2),
            _ => None,
        }
    }

    pub fn distance(self) -> Option<usize> {
        match self {
            DistanceTag::D0 => Some(0),
            DistanceTag::D1 => Some(1),
            DistanceTag::D2 => Some(2),
            DistanceTag::All => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceTag::D0 => "d0",
            DistanceTag::D1 => "d1",
            DistanceTag::D2 => "d2",
            DistanceTag::All => "all",
        }
    }
}

impl fmt::Display for DistanceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "d0" => Ok(DistanceTag::D0),
            "d1" => Ok(DistanceTag::D1),
            "d2" => Ok(DistanceTag::D2),
            "all" => Ok(DistanceTag::All),
            other => Err(format!("unknown distance tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Box constraint.
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Full sweeps without any alpha change before giving up.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_passes: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("no training examples")]
    Empty,
    #[error("training set has only {0:?} examples")]
    SingleClass(Label),
    #[error("vectors disagree on dimension ({expected} vs {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Dual solution of a linear SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    /// Dense `sum_i alpha_i y_i x_i`.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl SmoSolution {
    pub fn decision(&self, v: &FeatureVector) -> f64 {
        dense_dot(&self.weights, v) - self.bias
    }

    /// `sum(alpha) - |w|^2 / 2`.
    pub fn dual_objective(&self) -> f64 {
        let norm: f64 = self.weights.iter().map(|w| w * w).sum();
        self.alphas.iter().sum::<f64>() - 0.5 * norm
    }

    /// Indices of examples whose KKT condition is violated beyond `tol`.
    pub fn kkt_violations(&self, examples: &[(FeatureVector, Label)], c: f64, tol: f64) -> Vec<usize> {
        examples
            .iter()
            .zip(&self.alphas)
            .enumerate()
            .filter(|(_, ((x, y), &a))| {
                let margin = y.sign() * self.decision(x);
                if a <= 0.0 {
                    margin < 1.0 - tol
                } else if a >= c {
                    margin > 1.0 + tol
                } else {
                    (margin - 1.0).abs() > tol
                }
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn dense_dot(weights: &[f64], v: &FeatureVector) -> f64 {
    v.active_ids().iter().map(|&id| weights[id as usize]).sum()
}

struct Smo<'a> {
    xs: Vec<&'a FeatureVector>,
    ys: Vec<f64>,
    norms: Vec<f64>,
    alphas: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    c: f64,
    tol: f64,
    rng: ChaCha8Rng,
}

impl Smo<'_> {
    fn error(&self, i: usize) -> f64 {
        dense_dot(&self.weights, self.xs[i]) - self.bias - self.ys[i]
    }

    fn is_bound(&self, i: usize) -> bool {
        self.alphas[i] <= 0.0 || self.alphas[i] >= self.c
    }

    fn snap(&self, a: f64) -> f64 {
        if a < ALPHA_SNAP {
            0.0
        } else if a > self.c - ALPHA_SNAP {
            self.c
        } else {
            a
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.ys[i1], self.ys[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo < STEP_EPS {
            return false;
        }
        let k11 = self.norms[i1];
        let k22 = self.norms[i2];
        let k12 = self.xs[i1].dot(self.xs[i2]) as f64;
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2_new = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Objective is linear along the constraint line; pick the better end.
            let f1 = y1 * (e1 + self.bias) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 + self.bias) - s * a1 * k12 - a2 * k22;
            let objective = |a2_end: f64| {
                let a1_end = a1 + s * (a2 - a2_end);
                a1_end * f1 + a2_end * f2 + 0.5 * a1_end * a1_end * k11 + 0.5 * a2_end * a2_end * k22 + s * a2_end * a1_end * k12
            };
            let (lobj, hobj) = (objective(lo), objective(hi));
            if lobj < hobj - STEP_EPS {
                lo
            } else if lobj > hobj + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        a2_new = self.snap(a2_new);
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }
        let a1_new = self.snap(a1 + s * (a2 - a2_new));

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        let b1 = e1 + d1 * k11 + d2 * k12 + self.bias;
        let b2 = e2 + d1 * k12 + d2 * k22 + self.bias;
        self.bias = if a1_new > 0.0 && a1_new < c {
            b1
        } else if a2_new > 0.0 && a2_new < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        for &id in self.xs[i1].active_ids() {
            self.weights[id as usize] += d1;
        }
        for &id in self.xs[i2].active_ids() {
            self.weights[id as usize] += d2;
        }
        self.alphas[i1] = a1_new;
        self.alphas[i2] = a2_new;
        true
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.error(i) * self.ys[i];
        (r < -self.tol && self.alphas[i] < self.c) || (r > self.tol && self.alphas[i] > 0.0)
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates_kkt(i2) {
            return false;
        }
        let n = self.alphas.len();
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if !self.is_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    /// Re-derives the bias from the current alphas: the mean over non-bound
    /// examples when there are any, otherwise the midpoint of the interval
    /// allowed by the bound examples' KKT conditions.
    fn refit_bias(&mut self) {
        let mut sum = 0.0;
        let mut free = 0usize;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..self.alphas.len() {
            let wx = dense_dot(&self.weights, self.xs[i]);
            let y = self.ys[i];
            let a = self.alphas[i];
            if a > 0.0 && a < self.c {
                sum += wx - y;
                free += 1;
            } else if (a <= 0.0) == (y > 0.0) {
                upper = upper.min(wx - y);
            } else {
                lower = lower.max(wx - y);
            }
        }
        self.bias = if free > 0 {
            sum / free as f64
        } else if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            self.bias
        };
    }

    fn any_violation(&self) -> bool {
        (0..self.alphas.len()).any(|i| self.violates_kkt(i))
    }
}

/// Trains a linear SVM on binary sparse vectors.
pub fn train_smo(examples: &[(FeatureVector, Label)], config: &TrainConfig) -> Result<SmoSolution, SvmError> {
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(SvmError::InvalidConfig(format!("C must be positive, got {}", config.c)));
    }
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(SvmError::InvalidConfig(format!("tol must be positive, got {}", config.tol)));
    }
    if config.max_passes == 0 {
        return Err(SvmError::InvalidConfig("max_passes must be at least 1".into()));
    }
    let first = examples.first().ok_or(SvmError::Empty)?;
    let dimension = first.0.dimension();
    for (x, _) in examples {
        if x.dimension() != dimension {
            return Err(SvmError::DimensionMismatch {
                expected: dimension,
                found: x.dimension(),
            });
        }
    }
    if examples.iter().all(|(_, y)| *y == first.1) {
        return Err(SvmError::SingleClass(first.1));
    }

    let n = examples.len();
    let mut smo = Smo {
        xs: examples.iter().map(|(x, _)| x).collect(),
        ys: examples.iter().map(|(_, y)| y.sign()).collect(),
        norms: examples.iter().map(|(x, _)| x.nnz() as f64).collect(),
        alphas: vec![0.0; n],
        weights: vec![0.0; dimension],
        bias: 0.0,
        c: config.c,
        tol: config.tol,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };

    let mut examine_all = true;
    let mut quiet_full_sweeps = 0;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let changed = if examine_all {
            (0..n).filter(|&i| smo.examine(i)).count()
        } else {
            (0..n).filter(|&i| !smo.is_bound(i) && smo.examine(i)).count()
        };
        if examine_all {
            if changed == 0 {
                if !smo.any_violation() {
                    converged = true;
                    break;
                }
                smo.refit_bias();
                if !smo.any_violation() {
                    converged = true;
                    break;
                }
                quiet_full_sweeps += 1;
                if quiet_full_sweeps >= config.max_passes {
                    break;
                }
            } else {
                quiet_full_sweeps = 0;
                examine_all = false;
            }
        } else if changed == 0 {
            examine_all = true;
        }
    }

    Ok(SmoSolution {
        alphas: smo.alphas,
        weights: smo.weights,
        bias: smo.bias,
        sweeps,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub positives: usize,
    pub negatives: usize,
    /// Training date, `YYYY-MM-DD`.
    pub trained_on: String,
}

/// A trained linear classifier with its own frozen feature index.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    weights: Vec<f64>,
    bias: f64,
    index: FeatureIndex,
    tag: DistanceTag,
    config: TrainConfig,
    metadata: ModelMetadata,
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("i/o error")]
    Io(#[from] std::io::Error),
    #[error("malformed model file")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported model format version {0} (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion(u64),
    #[error("missing format_version field")]
    MissingVersion,
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    distance_tag: DistanceTag,
    config: TrainConfig,
    feature_keys: Vec<String>,
    weights: Vec<(u32, f64)>,
    bias: f64,
    metadata: ModelMetadata,
}

impl Model {
    /// Wraps a solution whose weight dimension matches `index`.
    pub fn new(
        solution: &SmoSolution,
        mut index: FeatureIndex,
        tag: DistanceTag,
        config: TrainConfig,
        metadata: ModelMetadata,
    ) -> Result<Self, ModelFileError> {
        if solution.weights.len() != index.len() {
            return Err(ModelFileError::Invalid(format!(
                "weight dimension {} does not match index size {}",
                solution.weights.len(),
                index.len()
            )));
        }
        index.freeze();
        Ok(Self {
            weights: solution.weights.clone(),
            bias: solution.bias,
            index,
            tag,
            config,
            metadata,
        })
    }

    pub fn tag(&self) -> DistanceTag {
        self.tag
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Non-zero weights as `(id, value)`, sorted by id.
    pub fn sparse_weights(&self) -> Vec<(u32, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| (i as u32, w))
            .collect()
    }

    pub fn weight(&self, key: &str) -> Option<f64> {
        self.index.id(key).map(|id| self.weights[id as usize])
    }

    /// `w . v - b`. Ids outside the model dimension are ignored.
    pub fn decision(&self, v: &FeatureVector) -> f64 {
        v.active_ids().iter().filter_map(|&id| self.weights.get(id as usize)).sum::<f64>() - self.bias
    }

    /// Decision for raw pair keys, projected through the model's index.
    pub fn decision_for_pairs<S: AsRef<str>>(&self, pairs: impl IntoIterator<Item = S>) -> f64 {
        self.decision(&self.index.lookup(pairs))
    }

    pub fn classify(&self, v: &FeatureVector) -> Label {
        label_for(self.decision(v))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            distance_tag: self.tag,
            config: self.config,
            feature_keys: self.index.keys().to_vec(),
            weights: self.sparse_weights(),
            bias: self.bias,
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            Some(v) => return Err(ModelFileError::UnsupportedVersion(v)),
            None => return Err(ModelFileError::MissingVersion),
        }
        let file: ModelFile = serde_json::from_value(raw)?;
        let dimension = file.feature_keys.len();
        let index = FeatureIndex::from_keys(file.feature_keys);
        if index.len() != dimension {
            return Err(ModelFileError::Invalid("duplicate feature keys".into()));
        }
        let mut weights = vec![0.0; dimension];
        for (id, w) in file.weights {
            let slot = weights
                .get_mut(id as usize)
                .ok_or_else(|| ModelFileError::Invalid(format!("weight id {id} >= dimension {dimension}")))?;
            *slot = w;
        }
        if !file.bias.is_finite() {
            return Err(ModelFileError::Invalid("non-finite bias".into()));
        }
        Ok(Self {
            weights,
            bias: file.bias,
            index,
            tag: file.distance_tag,
            config: file.config,
            metadata: file.metadata,
        })
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<(), ModelFileError> {
        writer.write_all(self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Self, ModelFileError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Sign of a decision value; exactly zero is negative.
pub fn label_for(decision: f64) -> Label {
    if decision > 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}
