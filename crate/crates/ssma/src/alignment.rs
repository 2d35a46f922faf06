//! The alignment core: quotient-matrix assembly, pencil solve, and the
//! per-domain row-block projector.
//!
//! Fitting builds, per domain, a kNN geometry graph over all (labeled and
//! unlabeled) samples, plus joint class-similarity and class-dissimilarity
//! graphs over the labeled ones. After rescaling the three graphs to unit
//! Frobenius norm, the d×d quotient matrices
//!
//! ```text
//! A = X (μ L_g + L_s) Xᵀ      B = X L_d Xᵀ
//! ```
//!
//! are assembled without ever materializing an N×N matrix, and the pencil
//! `A φ = λ B φ` is solved for all d eigenpairs. The projector stacks the
//! `√λ`-scaled eigenvectors as columns; its row block `m` maps domain `m`
//! into the shared latent space.

use ndarray::{s, Array2};

use crate::dataset::{DomainDataset, MultiDomainDataset};
use crate::eigen::{self, RidgePolicy};
use crate::error::{Error, Result};
use crate::evaluate::{cohen_kappa, stratified_folds, ConfusionMatrix, Predictor};
use crate::graphs::{self, Laplacian, SparseGraph};

/// Fit-time knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentParams {
    /// Tradeoff between the geometry term and the class-similarity term.
    pub mu: f64,
    /// Neighbor count for the per-domain geometry graphs.
    pub k: usize,
    /// Pencil regularization policy.
    pub ridge: RidgePolicy,
    /// Standardize each domain's features (train statistics) before fitting.
    pub standardize: bool,
    /// Fixed latent dimension; `None` keeps all d and defers to
    /// [`select_dims`].
    pub dims: Option<usize>,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self { mu: 1.0, k: 9, ridge: RidgePolicy::Auto, standardize: true, dims: None }
    }
}

/// Per-feature standardization statistics for one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DomainStats {
    fn from_features(features: &Array2<f64>) -> Self {
        let (d, n) = features.dim();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for i in 0..d {
            let row = features.row(i);
            let m = row.sum() / n as f64;
            let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            mean[i] = m;
            // Constant features standardize to zero rather than dividing by 0.
            std[i] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    fn apply(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let m = self.mean[i];
            let s = self.std[i];
            row.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    fn unapply(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let m = self.mean[i];
            let s = self.std[i];
            row.mapv_inplace(|v| v * s + m);
        }
        out
    }
}

/// A fitted alignment: eigenvalues, the `d × d` projector in per-domain row
/// blocks, standardization statistics, and the fit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    domain_ids: Vec<String>,
    domain_dims: Vec<usize>,
    class_count: u32,
    eigenvalues: Vec<f64>,
    projector: Array2<f64>,
    standardization: Option<Vec<DomainStats>>,
    params: AlignmentParams,
    ridge_used: f64,
    chosen_dims: usize,
}

impl AlignmentModel {
    /// Reassembles a model from stored fields (used by persistence).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        domain_ids: Vec<String>,
        domain_dims: Vec<usize>,
        class_count: u32,
        eigenvalues: Vec<f64>,
        projector: Array2<f64>,
        standardization: Option<Vec<DomainStats>>,
        params: AlignmentParams,
        ridge_used: f64,
        chosen_dims: usize,
    ) -> Result<Self> {
        let d: usize = domain_dims.iter().sum();
        if domain_ids.len() != domain_dims.len() {
            return Err(Error::Validation("domain id/dim count mismatch".into()));
        }
        if projector.dim() != (d, d) {
            return Err(Error::Validation(format!(
                "projector must be {d}×{d}, got {:?}",
                projector.dim()
            )));
        }
        if eigenvalues.len() != d {
            return Err(Error::Validation("one eigenvalue per latent dimension required".into()));
        }
        if chosen_dims == 0 || chosen_dims > d {
            return Err(Error::Validation(format!("chosen dims {chosen_dims} outside 1..={d}")));
        }
        if let Some(stats) = &standardization {
            if stats.len() != domain_dims.len()
                || stats
                    .iter()
                    .zip(&domain_dims)
                    .any(|(st, &dm)| st.mean.len() != dm || st.std.len() != dm)
            {
                return Err(Error::Validation("standardization stats shape mismatch".into()));
            }
        }
        Ok(Self {
            domain_ids,
            domain_dims,
            class_count,
            eigenvalues,
            projector,
            standardization,
            params,
            ridge_used,
            chosen_dims,
        })
    }

    pub fn domain_ids(&self) -> &[String] {
        &self.domain_ids
    }

    pub fn domain_dims(&self) -> &[usize] {
        &self.domain_dims
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    /// Ascending eigenvalues of the fitted pencil.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The full `d × d` projector with `√λ`-scaled columns.
    pub fn projector(&self) -> &Array2<f64> {
        &self.projector
    }

    pub fn params(&self) -> &AlignmentParams {
        &self.params
    }

    /// The ridge `ε` the eigensolver actually applied.
    pub fn ridge_used(&self) -> f64 {
        self.ridge_used
    }

    /// Latent dimension `r` used by default for projection.
    pub fn dims(&self) -> usize {
        self.chosen_dims
    }

    pub fn set_dims(&mut self, r: usize) -> Result<()> {
        let d = self.d_total();
        if r == 0 || r > d {
            return Err(Error::Parameter(format!("dims {r} outside 1..={d}")));
        }
        self.chosen_dims = r;
        Ok(())
    }

    pub fn d_total(&self) -> usize {
        self.projector.nrows()
    }

    pub fn standardization(&self) -> Option<&[DomainStats]> {
        self.standardization.as_deref()
    }

    pub fn domain_index(&self, id: &str) -> Result<usize> {
        self.domain_ids
            .iter()
            .position(|d| d == id)
            .ok_or_else(|| Error::Validation(format!("unknown domain '{id}' in model")))
    }

    /// Row block `f^m` of the projector (`d_m × d`).
    pub fn domain_block(&self, m: usize) -> Array2<f64> {
        let start: usize = self.domain_dims[..m].iter().sum();
        self.projector.slice(s![start..start + self.domain_dims[m], ..]).to_owned()
    }

    fn standardize_for(&self, m: usize, x: &Array2<f64>) -> Array2<f64> {
        match &self.standardization {
            Some(stats) => stats[m].apply(x),
            None => x.to_owned(),
        }
    }

    /// Projects a `d_m × n` matrix from domain `domain_id` onto the first
    /// `r` latent coordinates.
    pub fn project(&self, domain_id: &str, x: &Array2<f64>, r: usize) -> Result<Array2<f64>> {
        let m = self.domain_index(domain_id)?;
        if x.nrows() != self.domain_dims[m] {
            return Err(Error::Validation(format!(
                "domain '{domain_id}' expects {} features, got {}",
                self.domain_dims[m],
                x.nrows()
            )));
        }
        let d = self.d_total();
        if r == 0 || r > d {
            return Err(Error::Parameter(format!("projection dims {r} outside 1..={d}")));
        }
        let x_std = self.standardize_for(m, x);
        let block = self.domain_block(m);
        Ok(block.slice(s![.., ..r]).t().dot(&x_std))
    }

    /// Synthesizes `dst`-domain features from `src`-domain samples by going
    /// through the full latent space and back via the pseudoinverse of the
    /// destination projector.
    pub fn synthesize(&self, src: &str, dst: &str, x: &Array2<f64>) -> Result<Array2<f64>> {
        let src_m = self.domain_index(src)?;
        let dst_m = self.domain_index(dst)?;
        if x.nrows() != self.domain_dims[src_m] {
            return Err(Error::Validation(format!(
                "domain '{src}' expects {} features, got {}",
                self.domain_dims[src_m],
                x.nrows()
            )));
        }
        let d = self.d_total();
        let latent = self.project(src, x, d)?;
        // latent = f_dstᵀ · x_dst  =>  x_dst = pinv(f_dstᵀ) · latent.
        let dst_block_t = self.domain_block(dst_m).t().to_owned();
        let pinv = crate::linalg::pinv(&dst_block_t, 1e-10).ok_or_else(|| {
            Error::Numerical(format!("projector for domain '{dst}' is numerically rank-zero"))
        })?;
        let recovered = pinv.dot(&latent);
        Ok(match &self.standardization {
            Some(stats) => stats[dst_m].unapply(&recovered),
            None => recovered,
        })
    }
}

/// The assembled quotient matrices plus everything needed to audit them.
#[derive(Debug, Clone)]
pub struct QuotientAssembly {
    /// `X (μ L_g + L_s) Xᵀ`.
    pub a: Array2<f64>,
    /// `X L_d Xᵀ`.
    pub b: Array2<f64>,
    /// Joint geometry Laplacian (rescaled), block-diagonal over domains.
    pub geometry: Laplacian,
    /// Class-similarity Laplacian (rescaled).
    pub similarity: Laplacian,
    /// Class-dissimilarity Laplacian (rescaled).
    pub dissimilarity: Laplacian,
    /// The dataset with per-domain standardization applied (identical to the
    /// input when standardization is off).
    pub standardized: MultiDomainDataset,
    /// The standardization statistics, when enabled.
    pub stats: Option<Vec<DomainStats>>,
}

/// `X L Xᵀ` as a dense `d × d` matrix, iterating the sparse Laplacian
/// edges directly; the block-diagonal `X` is never materialized.
pub fn gram_laplacian(ds: &MultiDomainDataset, lap: &Laplacian) -> Array2<f64> {
    let d = ds.d_total();
    let dim_offsets = ds.dim_offsets();
    let mut z = Array2::<f64>::zeros((d, d));

    for (joint, &deg) in lap.degrees().iter().enumerate() {
        if deg == 0.0 {
            continue;
        }
        let (m, local) = ds.locate(joint);
        let x = ds.domains()[m].features().column(local);
        let off = dim_offsets[m];
        for a in 0..x.len() {
            for b in 0..x.len() {
                z[[off + a, off + b]] += deg * x[a] * x[b];
            }
        }
    }
    for &(i, j, w) in lap.adjacency().edges() {
        let (mi, li) = ds.locate(i as usize);
        let (mj, lj) = ds.locate(j as usize);
        let xi = ds.domains()[mi].features().column(li);
        let xj = ds.domains()[mj].features().column(lj);
        let (oi, oj) = (dim_offsets[mi], dim_offsets[mj]);
        for a in 0..xi.len() {
            for b in 0..xj.len() {
                let v = w * xi[a] * xj[b];
                z[[oi + a, oj + b]] -= v;
                z[[oj + b, oi + a]] -= v;
            }
        }
    }
    z
}

fn validate_fit_inputs(ds: &MultiDomainDataset, params: &AlignmentParams) -> Result<()> {
    if !(params.mu >= 0.0) || !params.mu.is_finite() {
        return Err(Error::Parameter(format!("mu must be finite and >= 0, got {}", params.mu)));
    }
    if params.k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    for dom in ds.domains() {
        if dom.len() <= params.k {
            return Err(Error::Parameter(format!(
                "domain '{}' has {} samples, need more than k = {}",
                dom.id(),
                dom.len(),
                params.k
            )));
        }
    }
    let missing = ds.uncovered_classes();
    if !missing.is_empty() {
        return Err(Error::Labels(format!(
            "classes {missing:?} have no labeled samples in any domain"
        )));
    }
    if ds.labeled_classes().len() < 2 {
        return Err(Error::Labels("fitting needs labeled samples from at least 2 classes".into()));
    }
    if let Some(r) = params.dims {
        let d = ds.d_total();
        if r == 0 || r > d {
            return Err(Error::Parameter(format!("dims {r} outside 1..={d}")));
        }
    }
    Ok(())
}

/// Builds the standardized dataset, the three rescaled graph Laplacians,
/// and the quotient matrices `A`, `B`.
pub fn assemble_quotient(
    ds: &MultiDomainDataset,
    params: &AlignmentParams,
) -> Result<QuotientAssembly> {
    validate_fit_inputs(ds, params)?;

    let stats: Option<Vec<DomainStats>> = params
        .standardize
        .then(|| ds.domains().iter().map(|d| DomainStats::from_features(d.features())).collect());
    let standardized = match &stats {
        Some(per_domain) => {
            let domains = ds
                .domains()
                .iter()
                .zip(per_domain)
                .map(|(dom, st)| {
                    DomainDataset::new(
                        dom.id(),
                        st.apply(dom.features()),
                        dom.labels().to_vec(),
                        dom.name(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            MultiDomainDataset::new(domains, ds.class_count())?
        }
        None => ds.clone(),
    };

    let per_domain_knn = standardized
        .domains()
        .iter()
        .map(|dom| graphs::knn_graph(dom.features().view(), params.k))
        .collect::<Result<Vec<_>>>()?;
    let joint_geometry = SparseGraph::block_diag(&per_domain_knn);
    let (w_s, w_d) = graphs::class_graphs(&standardized)?;

    let rescaled = graphs::frobenius_rescale(&[joint_geometry, w_s, w_d])?;
    let geometry = graphs::laplacian(&rescaled[0]);
    let similarity = graphs::laplacian(&rescaled[1]);
    let dissimilarity = graphs::laplacian(&rescaled[2]);

    let g_s = gram_laplacian(&standardized, &similarity);
    let a = if params.mu == 0.0 {
        g_s
    } else {
        let g_g = gram_laplacian(&standardized, &geometry);
        g_g * params.mu + g_s
    };
    let b = gram_laplacian(&standardized, &dissimilarity);

    Ok(QuotientAssembly { a, b, geometry, similarity, dissimilarity, standardized, stats })
}

/// Fits the alignment model: graphs → quotient matrices → pencil →
/// `√λ`-scaled projector. Deterministic given its inputs.
pub fn fit(ds: &MultiDomainDataset, params: &AlignmentParams) -> Result<AlignmentModel> {
    let assembly = assemble_quotient(ds, params)?;
    let solution = match params.ridge {
        RidgePolicy::Auto => eigen::solve_generalized_auto(&assembly.a, &assembly.b)?,
        RidgePolicy::Fixed(eps) => eigen::solve_generalized(&assembly.a, &assembly.b, eps)?,
    };

    let projector = scale_columns_by_sqrt_lambda(solution.eigenvectors(), solution.eigenvalues());
    let d = ds.d_total();
    let chosen_dims = params.dims.unwrap_or(d);

    AlignmentModel::from_parts(
        ds.domains().iter().map(|dom| dom.id().to_string()).collect(),
        ds.domain_dims(),
        ds.class_count(),
        solution.eigenvalues().to_vec(),
        projector,
        assembly.stats,
        params.clone(),
        solution.ridge(),
        chosen_dims,
    )
}

/// Column `i` scaled by `√max(λ_i, 0)`; negative eigenvalues (numerical
/// noise only) clamp to zero rather than going imaginary.
pub(crate) fn scale_columns_by_sqrt_lambda(
    vectors: &Array2<f64>,
    values: &[f64],
) -> Array2<f64> {
    let mut out = vectors.to_owned();
    for (i, mut col) in out.columns_mut().into_iter().enumerate() {
        let scale = values[i].max(0.0).sqrt();
        col.mapv_inplace(|v| v * scale);
    }
    out
}

/// Picks the latent dimension by cross-validated kappa over `r ∈ 1..=d`,
/// returning the smallest `r` within 0.005 kappa of the best and storing it
/// in the model.
///
/// `latent` holds the pooled labeled samples projected to all `d`
/// dimensions (so row prefixes give every candidate `r`); `factory` trains
/// the classifier under evaluation. Folds are stratified round-robin in
/// sample order, so the procedure is deterministic.
pub fn select_dims(
    model: &mut AlignmentModel,
    latent: &Array2<f64>,
    labels: &[u32],
    folds: usize,
    factory: &dyn Fn(&Array2<f64>, &[u32]) -> Result<Box<dyn Predictor>>,
) -> Result<usize> {
    let d = model.d_total();
    if latent.nrows() != d {
        return Err(Error::Validation(format!(
            "latent matrix must have all {d} rows, got {}",
            latent.nrows()
        )));
    }
    if latent.ncols() != labels.len() {
        return Err(Error::Validation("one label per latent column required".into()));
    }
    let mut class_sizes = std::collections::BTreeMap::<u32, usize>::new();
    for &y in labels {
        *class_sizes.entry(y).or_insert(0) += 1;
    }
    if class_sizes.len() < 2 {
        return Err(Error::Labels("dimension selection needs at least 2 classes".into()));
    }
    let smallest_class = class_sizes.values().copied().min().unwrap_or(0);
    if folds < 2 || folds > smallest_class {
        return Err(Error::Parameter(format!(
            "folds = {folds} must be in 2..=smallest class count ({smallest_class})"
        )));
    }

    let fold_of = stratified_folds(labels, folds);
    let n = labels.len();
    let mut best_r = 1usize;
    let mut best_kappa = f64::NEG_INFINITY;
    let mut kappas = Vec::with_capacity(d);
    for r in 1..=d {
        let mut cm = ConfusionMatrix::new(model.class_count);
        for fold in 0..folds {
            let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let test_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            let take = |idx: &[usize]| {
                let mut z = Array2::<f64>::zeros((r, idx.len()));
                for (out, &i) in idx.iter().enumerate() {
                    z.column_mut(out).assign(&latent.slice(s![..r, i]));
                }
                z
            };
            let z_train = take(&train_idx);
            let y_train: Vec<u32> = train_idx.iter().map(|&i| labels[i]).collect();
            let z_test = take(&test_idx);
            let predictor = factory(&z_train, &y_train)?;
            let predictions = predictor.predict(&z_test);
            for (&i, &p) in test_idx.iter().zip(&predictions) {
                cm.record(labels[i], p)?;
            }
        }
        let kappa = cohen_kappa(&cm)?;
        kappas.push(kappa);
        if kappa > best_kappa {
            best_kappa = kappa;
            best_r = r;
        }
    }
    // Parsimony: smallest r within 0.005 of the best.
    for (i, &kappa) in kappas.iter().enumerate() {
        if kappa >= best_kappa - 0.005 {
            best_r = i + 1;
            break;
        }
    }
    model.set_dims(best_r)?;
    Ok(best_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_spiral_pair, Deformation};
    use ndarray::array;

    fn toy_dataset(seed: u64) -> MultiDomainDataset {
        make_spiral_pair(40, 3, 0.05, &Deformation::new(2.0, 90.0, [0.0, 0.0]), seed).unwrap()
    }

    fn small_params() -> AlignmentParams {
        AlignmentParams { k: 5, ..AlignmentParams::default() }
    }

    #[test]
    fn toy_projector_is_4x4_with_2_2_blocks() {
        let ds = toy_dataset(1);
        let model = fit(&ds, &small_params()).unwrap();
        assert_eq!(model.projector().dim(), (4, 4));
        assert_eq!(model.domain_dims(), &[2, 2]);
        assert_eq!(model.domain_block(0).dim(), (2, 4));
        assert_eq!(model.domain_block(1).dim(), (2, 4));
        assert_eq!(model.eigenvalues().len(), 4);
        for w in model.eigenvalues().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn quotient_matrices_symmetric_and_psd() {
        let ds = toy_dataset(2);
        let asm = assemble_quotient(&ds, &small_params()).unwrap();
        for m in [&asm.a, &asm.b] {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(m[[i, j]], m[[j, i]], "exact symmetry by construction");
                }
            }
            let (vals, _) = crate::linalg::jacobi_eigh(m);
            for v in vals.iter() {
                assert!(*v >= -1e-8, "eigenvalue {v} below PSD tolerance");
            }
        }
    }

    /// Literal double-sum forms of the three loss terms.
    fn literal_terms(asm: &QuotientAssembly, f: &Array2<f64>) -> (f64, f64, f64) {
        let ds = &asm.standardized;
        let dim_offsets = ds.dim_offsets();
        let project = |joint: usize| -> Vec<f64> {
            let (m, local) = ds.locate(joint);
            let x = ds.domains()[m].features().column(local);
            let off = dim_offsets[m];
            (0..f.ncols())
                .map(|c| (0..x.len()).map(|a| f[[off + a, c]] * x[a]).sum())
                .collect()
        };
        let sum_over = |lap: &Laplacian| -> f64 {
            // Double sum Σ_{i,j} W(i,j) ‖p_i − p_j‖² over unordered pairs;
            // this is the quantity the trace form equals exactly.
            lap.adjacency()
                .edges()
                .iter()
                .map(|&(i, j, w)| {
                    let pi = project(i as usize);
                    let pj = project(j as usize);
                    let dist2: f64 =
                        pi.iter().zip(&pj).map(|(a, b)| (a - b) * (a - b)).sum();
                    w * dist2
                })
                .sum()
        };
        (sum_over(&asm.geometry), sum_over(&asm.similarity), sum_over(&asm.dissimilarity))
    }

    fn trace_form(ds: &MultiDomainDataset, lap: &Laplacian, f: &Array2<f64>) -> f64 {
        let z = gram_laplacian(ds, lap);
        f.t().dot(&z).dot(f).diag().sum()
    }

    #[test]
    fn matrix_traces_equal_literal_double_sums() {
        let ds = toy_dataset(3);
        let params = small_params();
        let asm = assemble_quotient(&ds, &params).unwrap();
        let model = fit(&ds, &params).unwrap();
        let f = model.projector();

        let (g_sum, s_sum, d_sum) = literal_terms(&asm, f);
        let g_tr = trace_form(&asm.standardized, &asm.geometry, f);
        let s_tr = trace_form(&asm.standardized, &asm.similarity, f);
        let d_tr = trace_form(&asm.standardized, &asm.dissimilarity, f);

        let scale = g_sum.abs().max(s_sum.abs()).max(d_sum.abs()).max(1.0);
        assert!((g_tr - g_sum).abs() < 1e-8 * scale, "G: {g_tr} vs {g_sum}");
        assert!((s_tr - s_sum).abs() < 1e-8 * scale, "S: {s_tr} vs {s_sum}");
        assert!((d_tr - d_sum).abs() < 1e-8 * scale, "D: {d_tr} vs {d_sum}");

        // And the combined objective numerator: tr(Fᵀ A F) = μG + S.
        let combined = f.t().dot(&asm.a).dot(f).diag().sum();
        assert!(
            (combined - (params.mu * g_sum + s_sum)).abs() < 1e-8 * scale,
            "tr(FᵀAF) = {combined} vs μG+S = {}",
            params.mu * g_sum + s_sum
        );
    }

    #[test]
    fn zero_mu_removes_geometry_term_bitwise() {
        let ds = toy_dataset(4);
        let params = AlignmentParams { mu: 0.0, ..small_params() };
        let asm = assemble_quotient(&ds, &params).unwrap();
        let ls_only = gram_laplacian(&asm.standardized, &asm.similarity);
        assert_eq!(asm.a, ls_only);
    }

    #[test]
    fn identity_projector_returns_leading_coordinates() {
        let model = AlignmentModel::from_parts(
            vec!["a".into(), "b".into()],
            vec![2, 2],
            2,
            vec![1.0; 4],
            Array2::<f64>::eye(4),
            None,
            AlignmentParams { standardize: false, ..AlignmentParams::default() },
            0.0,
            4,
        )
        .unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let z = model.project("a", &x, 2).unwrap();
        assert_eq!(z, x);
        // Domain b occupies rows 2..4 of the projector.
        let zb = model.project("b", &x, 4).unwrap();
        assert_eq!(zb.dim(), (4, 2));
        assert_eq!(zb.slice(s![2.., ..]).to_owned(), x);
        assert_eq!(zb.slice(s![..2, ..]).to_owned(), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn projection_is_linear() {
        let ds = toy_dataset(5);
        let model = fit(&ds, &AlignmentParams { standardize: false, ..small_params() }).unwrap();
        let x1 = array![[1.0, -0.5], [0.25, 2.0]];
        let x2 = array![[0.0, 3.0], [-1.0, 0.5]];
        let (a, b) = (2.0, -0.7);
        let lhs = model.project("spiral1", &(&x1 * a + &x2 * b), 4).unwrap();
        let rhs = model.project("spiral1", &x1, 4).unwrap() * a
            + model.project("spiral1", &x2, 4).unwrap() * b;
        for (u, v) in lhs.iter().zip(rhs.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_reads_only_its_row_block() {
        let ds = toy_dataset(6);
        let model = fit(&ds, &small_params()).unwrap();
        let x = array![[0.3, -1.2], [0.8, 0.1]];
        let before = model.project("spiral1", &x, 3).unwrap();
        // Projecting junk through the other domain must not disturb anything.
        let junk = array![[1e9, -1e9], [42.0, -42.0]];
        let _ = model.project("spiral2", &junk, 3).unwrap();
        let after = model.project("spiral1", &x, 3).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn sqrt_lambda_clamps_negative_eigenvalues() {
        let vectors = array![[1.0, 2.0], [3.0, 4.0]];
        let scaled = scale_columns_by_sqrt_lambda(&vectors, &[-1e-12, 4.0]);
        assert_eq!(scaled.column(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(scaled.column(1).to_vec(), vec![4.0, 8.0]);
    }

    #[test]
    fn synthesize_round_trips_square_full_rank_projector() {
        let model = AlignmentModel::from_parts(
            vec!["a".into(), "b".into()],
            vec![2, 2],
            2,
            vec![1.0; 4],
            array![
                [1.0, 0.5, 0.0, 0.0],
                [0.0, 2.0, 0.0, 0.0],
                [0.0, 0.0, 1.5, -0.5],
                [0.0, 0.0, 0.5, 1.0]
            ],
            None,
            AlignmentParams { standardize: false, ..AlignmentParams::default() },
            0.0,
            4,
        )
        .unwrap();
        let x = array![[1.0, -2.0, 0.5], [0.25, 1.5, -1.0]];
        let back = model.synthesize("a", "a", &x).unwrap();
        for (u, v) in back.iter().zip(x.iter()) {
            assert!((u - v).abs() < 1e-6 * v.abs().max(1.0));
        }
    }

    #[test]
    fn synthesize_zero_input_recovers_destination_mean() {
        let ds = toy_dataset(7);
        let model = fit(&ds, &small_params()).unwrap();
        let zero = Array2::<f64>::zeros((2, 1));
        // Standardization is on: a zero *standardized* source vector is the
        // source mean; synthesizing from the mean itself gives dst mean +
        // pinv·(f_srcᵀ·0) inverse-standardized.
        let src_mean = {
            let stats = &model.standardization().unwrap()[0];
            let mut m = Array2::<f64>::zeros((2, 1));
            m[[0, 0]] = stats.mean[0];
            m[[1, 0]] = stats.mean[1];
            m
        };
        let out = model.synthesize("spiral1", "spiral2", &src_mean).unwrap();
        let dst_stats = &model.standardization().unwrap()[1];
        // Latent of the standardized mean is exactly zero, so the output is
        // the destination mean.
        let _ = zero;
        assert!((out[[0, 0]] - dst_stats.mean[0]).abs() < 1e-9);
        assert!((out[[1, 0]] - dst_stats.mean[1]).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_missing_class_coverage() {
        let ds = toy_dataset(8);
        // Strip all labels of class 3 everywhere.
        let domains: Vec<DomainDataset> = ds
            .domains()
            .iter()
            .map(|dom| {
                let labels = dom
                    .labels()
                    .iter()
                    .map(|l| match l {
                        Some(3) => None,
                        other => *other,
                    })
                    .collect();
                DomainDataset::new(dom.id(), dom.features().clone(), labels, dom.name()).unwrap()
            })
            .collect();
        let stripped = MultiDomainDataset::new(domains, 3).unwrap();
        let err = fit(&stripped, &small_params()).unwrap_err();
        assert!(err.to_string().contains('3'), "{err}");
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = toy_dataset(9);
        let m1 = fit(&ds, &small_params()).unwrap();
        let m2 = fit(&ds, &small_params()).unwrap();
        assert_eq!(m1, m2);
    }
}
