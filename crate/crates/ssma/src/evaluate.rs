//! Joint classification in the latent space and experiment orchestration.
//!
//! The classifier is a one-vs-rest linear hinge-loss model with L2
//! regularization, trained by dual coordinate descent with a fixed
//! permutation stream, so training is deterministic. Its regularization
//! strength is picked from a grid by 5-fold cross-validated Cohen's kappa.
//!
//! [`run_experiment`] drives the full protocol: stratified train/test
//! split, nested labeled subsampling per budget, representative unlabeled
//! selection by bisecting k-means, one projection fit per cell, a single
//! joint classifier on the pooled projected labels, and kappa scoring of
//! every domain's held-out test set.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{self, AlignmentParams};
use crate::dataset::{
    split_train_test, subsample_labeled, DomainDataset, MultiDomainDataset,
};
use crate::error::{Error, Result};
use crate::sampling::bisecting_kmeans;
use crate::seeding::{derive_seed, rng_for};
use crate::synth::{make_spiral_pair, Deformation};

/// Default regularization grid for the linear classifier.
pub const DEFAULT_C_GRID: [f64; 5] = [100.0, 250.0, 500.0, 750.0, 1000.0];

/// Anything that can label latent samples.
pub trait Predictor {
    /// One predicted class per column of `z`.
    fn predict(&self, z: &Array2<f64>) -> Vec<u32>;
}

/// C×C counts; rows are true classes, columns are predictions (1-based ids).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_count: u32) -> Self {
        let c = class_count as usize;
        Self { counts: Array2::zeros((c, c)) }
    }

    pub fn from_pairs(truth: &[u32], predicted: &[u32], class_count: u32) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Validation(format!(
                "{} truths vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::new(class_count);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: u32, predicted: u32) -> Result<()> {
        let c = self.counts.nrows() as u32;
        if truth == 0 || truth > c || predicted == 0 || predicted > c {
            return Err(Error::Validation(format!(
                "labels must lie in 1..={c}, got truth {truth}, prediction {predicted}"
            )));
        }
        self.counts[[truth as usize - 1, predicted as usize - 1]] += 1;
        Ok(())
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn class_count(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of diagonal mass.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.counts.diag().iter().sum::<u64>() as f64 / total as f64
    }
}

/// Cohen's kappa: `(p_o − p_e) / (1 − p_e)`.
///
/// When chance agreement is total (`p_e = 1`, both marginals concentrated
/// on one class), returns 1 for perfect agreement and 0 otherwise.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Validation("empty confusion matrix".into()));
    }
    let n = total as f64;
    let c = cm.class_count();
    let p_o = cm.counts().diag().iter().sum::<u64>() as f64 / n;
    let mut p_e = 0.0;
    for k in 0..c {
        let row: u64 = cm.counts().row(k).iter().sum();
        let col: u64 = cm.counts().column(k).iter().sum();
        p_e += (row as f64 / n) * (col as f64 / n);
    }
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(if (p_o - 1.0).abs() < 1e-15 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Stratified fold assignment: within each class (in sample order), samples
/// are dealt round-robin across folds. Deterministic, no randomness needed.
pub fn stratified_folds(labels: &[u32], folds: usize) -> Vec<usize> {
    let mut next_fold: BTreeMap<u32, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|&y| {
            let slot = next_fold.entry(y).or_insert(0);
            let fold = *slot;
            *slot = (*slot + 1) % folds;
            fold
        })
        .collect()
}

/// One-vs-rest linear hinge-loss classifier on latent features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<u32>,
    // One row per class: feature weights followed by the bias term.
    weights: Array2<f64>,
    chosen_c: f64,
}

impl LinearModel {
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn chosen_c(&self) -> f64 {
        self.chosen_c
    }

    /// Per-class decision values for each column of `z`.
    pub fn decision_values(&self, z: &Array2<f64>) -> Array2<f64> {
        let r = self.weights.ncols() - 1;
        assert_eq!(z.nrows(), r, "feature dimension mismatch");
        let mut out = self.weights.slice(s![.., ..r]).dot(z);
        for (c, mut row) in out.rows_mut().into_iter().enumerate() {
            let bias = self.weights[[c, r]];
            row.mapv_inplace(|v| v + bias);
        }
        out
    }
}

impl Predictor for LinearModel {
    fn predict(&self, z: &Array2<f64>) -> Vec<u32> {
        let scores = self.decision_values(z);
        (0..z.ncols())
            .map(|j| {
                let mut best = 0usize;
                for c in 1..self.classes.len() {
                    // Strict comparison: ties resolve to the smallest class id.
                    if scores[[c, j]] > scores[[best, j]] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect()
    }
}

const CD_MAX_EPOCHS: usize = 4000;
const CD_TOLERANCE: f64 = 1e-6;

/// L2-regularized hinge-loss binary SVM via dual coordinate descent with a
/// fixed permutation stream. `x` holds one sample per row (bias feature
/// already appended); `y` is ±1. `alpha` carries the dual variables in and
/// out, so solves along an ascending C path warm-start cheaply (the previous
/// solution stays feasible when the box grows).
fn train_binary(x: &Array2<f64>, y: &[f64], c: f64, alpha: &mut [f64]) -> Array1<f64> {
    let (n, dim) = x.dim();
    let mut w = vec![0.0f64; dim];
    for i in 0..n {
        if alpha[i] != 0.0 {
            let xi = x.row(i);
            let xi = xi.as_slice().expect("contiguous row");
            for (wv, xv) in w.iter_mut().zip(xi) {
                *wv += alpha[i] * y[i] * xv;
            }
        }
    }
    let q: Vec<f64> = (0..n).map(|i| x.row(i).dot(&x.row(i))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Fixed stream: permutations are identical on every run.
    let mut rng = rng_for(0x55aa, &["dual-cd"]);
    for _ in 0..CD_MAX_EPOCHS {
        order.shuffle(&mut rng);
        let mut worst = 0.0f64;
        for &i in &order {
            let xi = x.row(i);
            let xi = xi.as_slice().expect("contiguous row");
            let wx: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
            let g = y[i] * wx - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            worst = worst.max(pg.abs());
            if pg != 0.0 && q[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y[i];
                if delta != 0.0 {
                    for (wv, xv) in w.iter_mut().zip(xi) {
                        *wv += delta * xv;
                    }
                }
            }
        }
        if worst < CD_TOLERANCE {
            break;
        }
    }
    Array1::from_vec(w)
}

/// Samples as rows with the bias handled as an appended constant feature.
fn to_rows_augmented(z: &Array2<f64>) -> Array2<f64> {
    let (r, n) = z.dim();
    let mut x = Array2::<f64>::ones((n, r + 1));
    x.slice_mut(s![.., ..r]).assign(&z.t());
    x
}

/// One-vs-rest weights for every C in the (ascending) grid, warm-starting
/// each class's duals along the path.
fn fit_ovr_path(z: &Array2<f64>, y: &[u32], classes: &[u32], grid: &[f64]) -> Vec<LinearModel> {
    let x = to_rows_augmented(z);
    let n = y.len();
    let dim = x.ncols();
    let mut per_c: Vec<Array2<f64>> =
        grid.iter().map(|_| Array2::<f64>::zeros((classes.len(), dim))).collect();
    for (row, &class) in classes.iter().enumerate() {
        let y_pm: Vec<f64> = y.iter().map(|&v| if v == class { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0f64; n];
        for (ci, &c) in grid.iter().enumerate() {
            let w = train_binary(&x, &y_pm, c, &mut alpha);
            per_c[ci].row_mut(row).assign(&w);
        }
    }
    grid.iter()
        .zip(per_c)
        .map(|(&c, weights)| LinearModel { classes: classes.to_vec(), weights, chosen_c: c })
        .collect()
}

fn fit_ovr(z: &Array2<f64>, y: &[u32], classes: &[u32], c: f64) -> LinearModel {
    fit_ovr_path(z, y, classes, &[c]).pop().expect("one model per grid entry")
}

/// Trains the one-vs-rest linear classifier, selecting the regularization
/// strength from `c_grid` by 5-fold cross-validated kappa (folds capped by
/// the smallest class count; ties go to the smallest C).
pub fn train_linear(z: &Array2<f64>, y: &[u32], c_grid: &[f64]) -> Result<LinearModel> {
    if z.ncols() != y.len() {
        return Err(Error::Validation(format!(
            "{} samples vs {} labels",
            z.ncols(),
            y.len()
        )));
    }
    if c_grid.is_empty() {
        return Err(Error::Parameter("empty regularization grid".into()));
    }
    let mut classes: Vec<u32> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Labels(format!(
            "classifier training needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    let class_max = *classes.last().expect("nonempty");

    let mut grid: Vec<f64> = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let min_class = {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &v in y {
            *counts.entry(v).or_insert(0) += 1;
        }
        counts.values().copied().min().unwrap_or(0)
    };
    let folds = 5usize.min(min_class);

    let best_c = if grid.len() == 1 || folds < 2 {
        grid[0]
    } else {
        let fold_of = stratified_folds(y, folds);
        let n = y.len();
        let mut cms: Vec<ConfusionMatrix> =
            grid.iter().map(|_| ConfusionMatrix::new(u32::from(class_max))).collect();
        for fold in 0..folds {
            let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let test_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            let gather = |idx: &[usize]| {
                let mut m = Array2::<f64>::zeros((z.nrows(), idx.len()));
                for (out, &i) in idx.iter().enumerate() {
                    m.column_mut(out).assign(&z.column(i));
                }
                m
            };
            let z_train = gather(&train_idx);
            let y_train: Vec<u32> = train_idx.iter().map(|&i| y[i]).collect();
            let z_test = gather(&test_idx);
            let models = fit_ovr_path(&z_train, &y_train, &classes, &grid);
            for (ci, model) in models.iter().enumerate() {
                let predictions = model.predict(&z_test);
                for (&i, &p) in test_idx.iter().zip(&predictions) {
                    cms[ci].record(y[i], p)?;
                }
            }
        }
        let mut best = (f64::NEG_INFINITY, grid[0]);
        for (ci, cm) in cms.iter().enumerate() {
            let kappa = cohen_kappa(cm)?;
            // Strict improvement keeps the smallest C on ties.
            if kappa > best.0 {
                best = (kappa, grid[ci]);
            }
        }
        best.1
    };

    Ok(fit_ovr(z, y, &classes, best_c))
}

// ---------------------------------------------------------------------------
// Experiment orchestration
// ---------------------------------------------------------------------------

/// Feature-extraction method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Raw stacked features, no projection. Only defined when all domains
    /// share the same dimensionality.
    None,
    /// The manifold-alignment projection.
    Ssma,
    /// Per-domain PCA to the smallest domain dimensionality.
    Pca,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::None => "none",
            Method::Ssma => "ssma",
            Method::Pca => "pca",
        };
        f.write_str(s)
    }
}

/// Named deformation presets for the synthetic spiral pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeformationSetting {
    /// Scale only.
    S,
    /// Scale plus rotation.
    Sr,
    /// Scale, rotation, and translation.
    Srt,
}

impl DeformationSetting {
    pub fn deformation(&self) -> Deformation {
        match self {
            DeformationSetting::S => Deformation::new(0.4, 0.0, [0.0, 0.0]),
            DeformationSetting::Sr => Deformation::new(2.0, 90.0, [0.0, 0.0]),
            DeformationSetting::Srt => Deformation::new(2.0, 90.0, [3.0, -2.0]),
        }
    }
}

impl std::str::FromStr for DeformationSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(DeformationSetting::S),
            "sr" => Ok(DeformationSetting::Sr),
            "srt" => Ok(DeformationSetting::Srt),
            other => Err(Error::Parameter(format!(
                "unknown deformation setting '{other}' (expected s, sr, or srt)"
            ))),
        }
    }
}

/// Recipe for generating the two-spiral dataset inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub setting: DeformationSetting,
    pub n_per_class: usize,
    pub classes: u32,
    pub noise_sd: f64,
    pub seed: u64,
}

fn default_test_fraction() -> f64 {
    0.5
}
fn default_mu() -> f64 {
    1.0
}
fn default_k() -> usize {
    9
}
fn default_standardize() -> bool {
    true
}

/// Full experiment description; round-trips losslessly through TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset file to load (mutually exclusive with `synthetic`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<String>,
    /// Inline synthetic recipe (mutually exclusive with `dataset_path`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Domain contributing the large labeled budget.
    pub leading_domain: String,
    /// Labeled samples per class in the leading domain.
    pub leading_labeled_per_class: usize,
    /// Labeled samples per class in every other domain, one grid point per run.
    pub budgets: Vec<usize>,
    /// Representative unlabeled samples per domain (bisecting k-means centroids).
    pub unlabeled_per_domain: usize,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_standardize")]
    pub standardize: bool,
    /// Fixed latent dimension; absent means cross-validate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.dataset_path, &self.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset_path and synthetic are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of dataset_path or synthetic is required".into(),
                ))
            }
            _ => {}
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("budgets must be non-empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be non-empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if self.leading_labeled_per_class == 0 {
            return Err(Error::Config("leading_labeled_per_class must be positive".into()));
        }
        if self.unlabeled_per_domain == 0 {
            return Err(Error::Config("unlabeled_per_domain must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }

    fn resolve_dataset(&self) -> Result<MultiDomainDataset> {
        match (&self.dataset_path, &self.synthetic) {
            (Some(path), None) => crate::io::read_dataset_file(std::path::Path::new(path)),
            (None, Some(spec)) => make_spiral_pair(
                spec.n_per_class,
                spec.classes,
                spec.noise_sd,
                &spec.setting.deformation(),
                spec.seed,
            ),
            _ => Err(Error::Config("exactly one dataset source required".into())),
        }
    }
}

/// One scored (cell × method × target domain) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub leading_domain: String,
    pub target_domain: String,
    pub budget: usize,
    pub method: Method,
    pub seed: u64,
    pub kappa: f64,
    pub accuracy: f64,
    pub dims: usize,
    pub seconds: f64,
}

/// Labeled samples of one cell, pooled across domains in dataset order.
struct PooledLabels {
    per_domain: Vec<(Array2<f64>, Vec<u32>)>,
}

impl PooledLabels {
    fn from_dataset(ds: &MultiDomainDataset) -> Self {
        let per_domain = ds
            .domains()
            .iter()
            .map(|dom| {
                let idx: Vec<usize> =
                    (0..dom.len()).filter(|&j| dom.labels()[j].is_some()).collect();
                let mut feats = Array2::<f64>::zeros((dom.dim(), idx.len()));
                let mut labels = Vec::with_capacity(idx.len());
                for (out, &j) in idx.iter().enumerate() {
                    feats.column_mut(out).assign(&dom.features().column(j));
                    labels.push(dom.labels()[j].expect("filtered to labeled"));
                }
                (feats, labels)
            })
            .collect();
        Self { per_domain }
    }
}

/// Assembles the per-cell fit dataset: the subsampled labeled samples plus
/// `u` bisecting-k-means centroids of each domain's unlabeled pool.
fn build_fit_dataset(
    subsampled: &MultiDomainDataset,
    unlabeled_per_domain: usize,
    seed: u64,
) -> Result<MultiDomainDataset> {
    let mut domains = Vec::with_capacity(subsampled.domains().len());
    for dom in subsampled.domains() {
        let labeled_idx: Vec<usize> =
            (0..dom.len()).filter(|&j| dom.labels()[j].is_some()).collect();
        let pool_idx: Vec<usize> =
            (0..dom.len()).filter(|&j| dom.labels()[j].is_none()).collect();
        if pool_idx.len() < unlabeled_per_domain {
            return Err(Error::Labels(format!(
                "domain '{}': unlabeled pool has {} samples, need {unlabeled_per_domain}",
                dom.id(),
                pool_idx.len()
            )));
        }
        let mut pool = Array2::<f64>::zeros((dom.dim(), pool_idx.len()));
        for (out, &j) in pool_idx.iter().enumerate() {
            pool.column_mut(out).assign(&dom.features().column(j));
        }
        let kmeans_seed = derive_seed(seed, &["unlabeled", dom.id()]);
        let centroids = bisecting_kmeans(pool.view(), unlabeled_per_domain, kmeans_seed)?;

        let n_fit = labeled_idx.len() + unlabeled_per_domain;
        let mut feats = Array2::<f64>::zeros((dom.dim(), n_fit));
        let mut labels = Vec::with_capacity(n_fit);
        for (out, &j) in labeled_idx.iter().enumerate() {
            feats.column_mut(out).assign(&dom.features().column(j));
            labels.push(dom.labels()[j]);
        }
        for c in 0..unlabeled_per_domain {
            feats.column_mut(labeled_idx.len() + c).assign(&centroids.points().column(c));
            labels.push(None);
        }
        domains.push(DomainDataset::new(dom.id(), feats, labels, dom.name())?);
    }
    MultiDomainDataset::new(domains, subsampled.class_count())
}

/// Per-domain PCA projector for the baseline method.
struct PcaProjector {
    mean: Array1<f64>,
    components: Array2<f64>, // d_m × p
}

impl PcaProjector {
    fn fit(features: &Array2<f64>, p: usize) -> Self {
        let (d, n) = features.dim();
        let mean = features.sum_axis(ndarray::Axis(1)) / n as f64;
        let mut centered = features.to_owned();
        for (i, mut row) in centered.rows_mut().into_iter().enumerate() {
            row -= mean[i];
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let cov = centered.dot(&centered.t()) / denom;
        let (vals, vecs) = crate::linalg::jacobi_eigh(&cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
        let mut components = Array2::<f64>::zeros((d, p));
        for (out, &idx) in order.iter().take(p).enumerate() {
            let mut col = vecs.column(idx).to_owned();
            let mut lead = 0usize;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > col[lead].abs() {
                    lead = i;
                }
            }
            if col[lead] < 0.0 {
                col.mapv_inplace(|v| -v);
            }
            components.column_mut(out).assign(&col);
        }
        Self { mean, components }
    }

    fn project(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut centered = x.to_owned();
        for (i, mut row) in centered.rows_mut().into_iter().enumerate() {
            row -= self.mean[i];
        }
        self.components.t().dot(&centered)
    }
}

fn score_domain(
    truth: &[u32],
    predicted: &[u32],
    class_count: u32,
) -> Result<(f64, f64)> {
    let cm = ConfusionMatrix::from_pairs(truth, predicted, class_count)?;
    Ok((cohen_kappa(&cm)?, cm.accuracy()))
}

fn run_cell_method(
    config: &RunConfig,
    method: Method,
    fit_ds: &MultiDomainDataset,
    test_ds: &MultiDomainDataset,
    budget: usize,
    seed: u64,
) -> Result<Vec<ExperimentRow>> {
    let started = Instant::now();
    let class_count = fit_ds.class_count();
    let pooled = PooledLabels::from_dataset(fit_ds);
    let mut rows = Vec::with_capacity(test_ds.domains().len());

    // (projected pooled train, per-domain projected test, dims used)
    let (z_train, y_train, projected_tests, dims_used) = match method {
        Method::Ssma => {
            let params = AlignmentParams {
                mu: config.mu,
                k: config.k,
                standardize: config.standardize,
                dims: config.dims,
                ..AlignmentParams::default()
            };
            let mut model = alignment::fit(fit_ds, &params)?;
            let d = model.d_total();

            let pool_at = |r: usize, model: &alignment::AlignmentModel| -> Result<(Array2<f64>, Vec<u32>)> {
                let mut parts = Vec::new();
                let mut labels = Vec::new();
                for (m, (feats, y)) in pooled.per_domain.iter().enumerate() {
                    if y.is_empty() {
                        continue;
                    }
                    let z = model.project(fit_ds.domains()[m].id(), feats, r)?;
                    parts.push(z);
                    labels.extend_from_slice(y);
                }
                let total: usize = parts.iter().map(|p| p.ncols()).sum();
                let mut z = Array2::<f64>::zeros((r, total));
                let mut at = 0;
                for part in parts {
                    z.slice_mut(s![.., at..at + part.ncols()]).assign(&part);
                    at += part.ncols();
                }
                Ok((z, labels))
            };

            if config.dims.is_none() {
                let (z_full, y_full) = pool_at(d, &model)?;
                let min_class = {
                    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                    for &v in &y_full {
                        *counts.entry(v).or_insert(0) += 1;
                    }
                    counts.values().copied().min().unwrap_or(0)
                };
                let folds = 5usize.min(min_class);
                if folds >= 2 {
                    let factory = |z: &Array2<f64>, y: &[u32]| -> Result<Box<dyn Predictor>> {
                        Ok(Box::new(train_linear(z, y, &DEFAULT_C_GRID)?))
                    };
                    alignment::select_dims(&mut model, &z_full, &y_full, folds, &factory)?;
                }
            }
            let r = model.dims();
            let (z, y) = pool_at(r, &model)?;
            let tests = test_ds
                .domains()
                .iter()
                .map(|dom| model.project(dom.id(), dom.features(), r))
                .collect::<Result<Vec<_>>>()?;
            (z, y, tests, r)
        }
        Method::None => {
            let dims = fit_ds.domain_dims();
            if dims.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::Config(format!(
                    "method 'none' requires equal feature dimensions across domains, got {dims:?}"
                )));
            }
            let d = dims[0];
            let total: usize = pooled.per_domain.iter().map(|(_, y)| y.len()).sum();
            let mut z = Array2::<f64>::zeros((d, total));
            let mut y = Vec::with_capacity(total);
            let mut at = 0;
            for (feats, labels) in &pooled.per_domain {
                z.slice_mut(s![.., at..at + labels.len()]).assign(feats);
                y.extend_from_slice(labels);
                at += labels.len();
            }
            let tests =
                test_ds.domains().iter().map(|dom| dom.features().to_owned()).collect();
            (z, y, tests, d)
        }
        Method::Pca => {
            let p = fit_ds.domain_dims().into_iter().min().expect("nonempty");
            let projectors: Vec<PcaProjector> = fit_ds
                .domains()
                .iter()
                .map(|dom| PcaProjector::fit(dom.features(), p))
                .collect();
            let total: usize = pooled.per_domain.iter().map(|(_, y)| y.len()).sum();
            let mut z = Array2::<f64>::zeros((p, total));
            let mut y = Vec::with_capacity(total);
            let mut at = 0;
            for (m, (feats, labels)) in pooled.per_domain.iter().enumerate() {
                if labels.is_empty() {
                    continue;
                }
                z.slice_mut(s![.., at..at + labels.len()])
                    .assign(&projectors[m].project(feats));
                y.extend_from_slice(labels);
                at += labels.len();
            }
            let tests = test_ds
                .domains()
                .iter()
                .enumerate()
                .map(|(m, dom)| projectors[m].project(dom.features()))
                .collect();
            (z, y, tests, p)
        }
    };

    let classifier = train_linear(&z_train, &y_train, &DEFAULT_C_GRID)?;
    let seconds = started.elapsed().as_secs_f64();
    for (dom, z_test) in test_ds.domains().iter().zip(&projected_tests) {
        let truth: Vec<u32> = dom.labels().iter().map(|l| l.expect("test samples are labeled")).collect();
        let predicted = classifier.predict(z_test);
        let (kappa, accuracy) = score_domain(&truth, &predicted, class_count)?;
        rows.push(ExperimentRow {
            leading_domain: config.leading_domain.clone(),
            target_domain: dom.id().to_string(),
            budget,
            method,
            seed,
            kappa,
            accuracy,
            dims: dims_used,
            seconds,
        });
    }
    Ok(rows)
}

/// Runs the full grid: for every (seed, budget) cell the data pipeline runs
/// once, then every method is fitted and scored on each domain's test set.
/// Rows come back in (seed, budget, method, domain) order; everything except
/// the timing column is deterministic for a fixed config.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    let ds = config.resolve_dataset()?;
    if ds.domain_index(&config.leading_domain).is_none() {
        return Err(Error::Config(format!(
            "leading domain '{}' not present in the dataset",
            config.leading_domain
        )));
    }
    if config.methods.contains(&Method::None) {
        let dims = ds.domain_dims();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Config(format!(
                "method 'none' requires equal feature dimensions across domains, got {dims:?}"
            )));
        }
    }

    let cells: Vec<(u64, usize)> = config
        .seeds
        .iter()
        .flat_map(|&seed| config.budgets.iter().map(move |&budget| (seed, budget)))
        .collect();

    let nested: Vec<Vec<ExperimentRow>> = cells
        .par_iter()
        .map(|&(seed, budget)| -> Result<Vec<ExperimentRow>> {
            let (train, test) = split_train_test(&ds, config.test_fraction, seed)?;
            let mut counts = BTreeMap::new();
            for dom in train.domains() {
                let want = if dom.id() == config.leading_domain {
                    config.leading_labeled_per_class
                } else {
                    budget
                };
                counts.insert(dom.id().to_string(), want);
            }
            let subsampled = subsample_labeled(&train, &counts, seed)?;
            let fit_ds = build_fit_dataset(&subsampled, config.unlabeled_per_domain, seed)?;
            let mut rows = Vec::new();
            for &method in &config.methods {
                rows.extend(run_cell_method(config, method, &fit_ds, &test, budget, seed)?);
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(nested.into_iter().flatten().collect())
}
