//! Datasets, labels, and joint indexing across domains.
//!
//! A [`DomainDataset`] stores one domain's samples as the columns of a
//! `d_m × n_m` matrix plus an optional class label per sample. A
//! [`MultiDomainDataset`] is an ordered collection of domains sharing a
//! class vocabulary `{1..C}`; its joint sample axis (length `N = Σ n_m`)
//! is what the N×N graph matrices are indexed by, and its joint feature
//! axis (length `d = Σ d_m`) is the row axis of the block-diagonal data
//! matrix produced by [`assemble_block_diagonal`].

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Class label, 1-based. Unlabeled samples carry `None`; there is no
/// sentinel class, so unlabeled rows can never leak into label graphs.
pub type Label = Option<u32>;

/// One domain: feature matrix with samples as columns, plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    id: String,
    features: Array2<f64>,
    labels: Vec<Label>,
    name: String,
}

impl DomainDataset {
    pub fn new(
        id: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<Label>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        let (d, n) = features.dim();
        if d == 0 || n == 0 {
            return Err(Error::Validation(format!(
                "domain '{id}': feature matrix must be at least 1×1, got {d}×{n}"
            )));
        }
        if labels.len() != n {
            return Err(Error::Validation(format!(
                "domain '{id}': {} labels for {n} samples",
                labels.len()
            )));
        }
        Ok(Self { id, features, labels, name: name.into() })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `d_m × n_m`, columns are samples.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Sample indices per class, in sample order.
    pub fn indices_by_class(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(c) = label {
                map.entry(*c).or_default().push(i);
            }
        }
        map
    }

    /// New dataset keeping the samples at `indices` (in the given order),
    /// with labels overridden by `labels`.
    fn select(&self, indices: &[usize], labels: Vec<Label>) -> Self {
        let d = self.dim();
        let mut features = Array2::<f64>::zeros((d, indices.len()));
        for (out, &src) in indices.iter().enumerate() {
            features.column_mut(out).assign(&self.features.column(src));
        }
        Self { id: self.id.clone(), features, labels, name: self.name.clone() }
    }
}

/// Ordered collection of domains with a shared class count.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomainDataset {
    domains: Vec<DomainDataset>,
    class_count: u32,
    joint_offsets: Vec<usize>,
}

impl MultiDomainDataset {
    pub fn new(domains: Vec<DomainDataset>, class_count: u32) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::Validation("at least one domain is required".into()));
        }
        if class_count == 0 {
            return Err(Error::Validation("class count must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for dom in &domains {
            if !seen.insert(dom.id().to_string()) {
                return Err(Error::Validation(format!("duplicate domain id '{}'", dom.id())));
            }
            for (i, label) in dom.labels().iter().enumerate() {
                if let Some(c) = label {
                    if *c == 0 || *c > class_count {
                        return Err(Error::Validation(format!(
                            "domain '{}', sample {i}: label {c} outside 1..={class_count}",
                            dom.id()
                        )));
                    }
                }
            }
        }
        let mut joint_offsets = Vec::with_capacity(domains.len());
        let mut acc = 0usize;
        for dom in &domains {
            joint_offsets.push(acc);
            acc += dom.len();
        }
        Ok(Self { domains, class_count, joint_offsets })
    }

    pub fn domains(&self) -> &[DomainDataset] {
        &self.domains
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    /// Exclusive prefix sums of the per-domain sample counts.
    pub fn joint_offsets(&self) -> &[usize] {
        &self.joint_offsets
    }

    /// N = Σ n_m.
    pub fn n_total(&self) -> usize {
        self.domains.iter().map(DomainDataset::len).sum()
    }

    /// d = Σ d_m.
    pub fn d_total(&self) -> usize {
        self.domains.iter().map(DomainDataset::dim).sum()
    }

    pub fn domain_dims(&self) -> Vec<usize> {
        self.domains.iter().map(DomainDataset::dim).collect()
    }

    /// Exclusive prefix sums of the per-domain feature dimensions.
    pub fn dim_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.domains.len());
        let mut acc = 0usize;
        for dom in &self.domains {
            offs.push(acc);
            acc += dom.dim();
        }
        offs
    }

    pub fn domain_index(&self, id: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.id() == id)
    }

    /// Maps a joint sample index to `(domain index, local sample index)`.
    pub fn locate(&self, joint: usize) -> (usize, usize) {
        debug_assert!(joint < self.n_total());
        let m = match self.joint_offsets.binary_search(&joint) {
            Ok(m) => m,
            Err(ins) => ins - 1,
        };
        (m, joint - self.joint_offsets[m])
    }

    /// Labels along the joint sample axis.
    pub fn joint_labels(&self) -> Vec<Label> {
        self.domains.iter().flat_map(|d| d.labels().iter().copied()).collect()
    }

    /// Classes that have at least one labeled sample in some domain.
    pub fn labeled_classes(&self) -> BTreeSet<u32> {
        self.joint_labels().into_iter().flatten().collect()
    }

    /// Classes from `{1..C}` with no labeled sample anywhere.
    pub fn uncovered_classes(&self) -> Vec<u32> {
        let seen = self.labeled_classes();
        (1..=self.class_count).filter(|c| !seen.contains(c)).collect()
    }
}

/// Dense block-diagonal data matrix `d × N`: block `(m, m)` holds domain
/// `m`'s features, everything off the diagonal blocks is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBlockMatrix {
    matrix: Array2<f64>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
}

impl JointBlockMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_offsets(&self) -> &[usize] {
        &self.col_offsets
    }
}

/// Assembles `X = diag(X¹, …, X^M)`.
pub fn assemble_block_diagonal(ds: &MultiDomainDataset) -> JointBlockMatrix {
    let d = ds.d_total();
    let n = ds.n_total();
    let mut matrix = Array2::<f64>::zeros((d, n));
    let row_offsets = ds.dim_offsets();
    let col_offsets = ds.joint_offsets().to_vec();
    for (m, dom) in ds.domains().iter().enumerate() {
        let r0 = row_offsets[m];
        let c0 = col_offsets[m];
        for i in 0..dom.dim() {
            for j in 0..dom.len() {
                matrix[[r0 + i, c0 + j]] = dom.features()[[i, j]];
            }
        }
    }
    JointBlockMatrix { matrix, row_offsets, col_offsets }
}

/// Stratified train/test split of the labeled samples.
///
/// Per domain and class, a seeded shuffle sends `round(test_fraction · n_c)`
/// samples (clamped so both sides stay nonempty) to the test side; unlabeled
/// samples always stay in train. Deterministic in `seed`.
pub fn split_train_test(
    ds: &MultiDomainDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiDomainDataset, MultiDomainDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut train_domains = Vec::with_capacity(ds.domains().len());
    let mut test_domains = Vec::with_capacity(ds.domains().len());
    for dom in ds.domains() {
        if dom.labeled_count() == 0 {
            return Err(Error::Labels(format!(
                "domain '{}' has no labeled samples to split",
                dom.id()
            )));
        }
        let mut test_mask = vec![false; dom.len()];
        for (class, indices) in dom.indices_by_class() {
            if indices.len() < 2 {
                return Err(Error::Labels(format!(
                    "class {class} has fewer than 2 labeled samples in domain '{}'",
                    dom.id()
                )));
            }
            let mut shuffled = indices.clone();
            let mut rng =
                rng_for(seed, &["split", dom.id(), "class", &class.to_string()]);
            shuffled.shuffle(&mut rng);
            let n_c = shuffled.len();
            let raw = (test_fraction * n_c as f64).round() as usize;
            let take = raw.clamp(1, n_c - 1);
            for &idx in shuffled.iter().take(take) {
                test_mask[idx] = true;
            }
        }

        let train_idx: Vec<usize> = (0..dom.len()).filter(|&i| !test_mask[i]).collect();
        let test_idx: Vec<usize> = (0..dom.len()).filter(|&i| test_mask[i]).collect();
        let train_labels = train_idx.iter().map(|&i| dom.labels()[i]).collect();
        let test_labels = test_idx.iter().map(|&i| dom.labels()[i]).collect();
        train_domains.push(dom.select(&train_idx, train_labels));
        test_domains.push(dom.select(&test_idx, test_labels));
    }
    Ok((
        MultiDomainDataset::new(train_domains, ds.class_count())?,
        MultiDomainDataset::new(test_domains, ds.class_count())?,
    ))
}

/// Keeps exactly `per_class_counts[domain]` labeled samples per class in
/// each domain and marks the rest unlabeled. Samples are never dropped.
///
/// Draws nest: under one seed, the selection for a count `c` contains the
/// selection for any smaller count, because the per-(domain, class) shuffle
/// does not depend on the requested count.
pub fn subsample_labeled(
    ds: &MultiDomainDataset,
    per_class_counts: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<MultiDomainDataset> {
    for dom in ds.domains() {
        if !per_class_counts.contains_key(dom.id()) {
            return Err(Error::Parameter(format!(
                "no labeled count requested for domain '{}'",
                dom.id()
            )));
        }
    }
    for key in per_class_counts.keys() {
        if ds.domain_index(key).is_none() {
            return Err(Error::Parameter(format!("unknown domain '{key}' in count map")));
        }
    }

    let mut out = Vec::with_capacity(ds.domains().len());
    for dom in ds.domains() {
        let want = per_class_counts[dom.id()];
        let mut keep = vec![false; dom.len()];
        for (class, indices) in dom.indices_by_class() {
            if indices.len() < want {
                return Err(Error::Labels(format!(
                    "domain '{}', class {class}: requested {want} labeled samples, only {} available (short by {})",
                    dom.id(),
                    indices.len(),
                    want - indices.len()
                )));
            }
            let mut shuffled = indices.clone();
            let mut rng =
                rng_for(seed, &["subsample", dom.id(), "class", &class.to_string()]);
            shuffled.shuffle(&mut rng);
            for &idx in shuffled.iter().take(want) {
                keep[idx] = true;
            }
        }
        let labels = dom
            .labels()
            .iter()
            .enumerate()
            .map(|(i, l)| if keep[i] { *l } else { None })
            .collect();
        let all: Vec<usize> = (0..dom.len()).collect();
        out.push(dom.select(&all, labels));
    }
    MultiDomainDataset::new(out, ds.class_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_domain_fixture() -> MultiDomainDataset {
        let d1 = DomainDataset::new(
            "a",
            array![[1.0]],
            vec![Some(1)],
            "first",
        )
        .unwrap();
        let d2 = DomainDataset::new(
            "b",
            array![[2.0, 3.0]],
            vec![Some(2), None],
            "second",
        )
        .unwrap();
        MultiDomainDataset::new(vec![d1, d2], 2).unwrap()
    }

    #[test]
    fn block_diagonal_two_domains() {
        let ds = two_domain_fixture();
        let x = assemble_block_diagonal(&ds);
        let expected = array![[1.0, 0.0, 0.0], [0.0, 2.0, 3.0]];
        assert_eq!(x.matrix(), &expected);
    }

    #[test]
    fn block_diagonal_single_domain_is_identity_case() {
        let feats = array![[1.0, 2.0], [3.0, 4.0]];
        let dom = DomainDataset::new("solo", feats.clone(), vec![Some(1), Some(1)], "").unwrap();
        let ds = MultiDomainDataset::new(vec![dom], 1).unwrap();
        let x = assemble_block_diagonal(&ds);
        assert_eq!(x.matrix(), &feats);
    }

    #[test]
    fn block_diagonal_dims_8_8_4() {
        let mut domains = Vec::new();
        for (i, d) in [8usize, 8, 4].iter().enumerate() {
            let feats = Array2::from_elem((*d, 10), (i + 1) as f64);
            let labels = vec![Some(1); 10];
            domains.push(DomainDataset::new(format!("s{i}"), feats, labels, "").unwrap());
        }
        let ds = MultiDomainDataset::new(domains, 1).unwrap();
        assert_eq!(ds.d_total(), 20);
        let x = assemble_block_diagonal(&ds);
        assert_eq!(x.matrix().dim(), (20, 30));
        // Off-diagonal blocks must be zero: count nonzeros.
        let nonzeros = x.matrix().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzeros, 8 * 10 + 8 * 10 + 4 * 10);
    }

    #[test]
    fn joint_offsets_are_prefix_sums() {
        let ds = two_domain_fixture();
        assert_eq!(ds.joint_offsets(), &[0, 1]);
        assert_eq!(ds.n_total(), 3);
        assert_eq!(ds.locate(0), (0, 0));
        assert_eq!(ds.locate(2), (1, 1));
    }

    #[test]
    fn label_out_of_range_rejected() {
        let dom =
            DomainDataset::new("a", array![[1.0]], vec![Some(3)], "").unwrap();
        let err = MultiDomainDataset::new(vec![dom], 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    fn labeled_domain(id: &str, per_class: usize, classes: u32) -> DomainDataset {
        let n = per_class * classes as usize;
        let mut feats = Array2::<f64>::zeros((2, n));
        let mut labels = Vec::with_capacity(n);
        for c in 0..classes {
            for i in 0..per_class {
                let j = c as usize * per_class + i;
                feats[[0, j]] = c as f64 * 10.0 + i as f64;
                feats[[1, j]] = i as f64;
                labels.push(Some(c + 1));
            }
        }
        DomainDataset::new(id, feats, labels, "").unwrap()
    }

    #[test]
    fn split_halves_100_per_class() {
        let ds = MultiDomainDataset::new(
            vec![labeled_domain("a", 100, 2), labeled_domain("b", 100, 2)],
            2,
        )
        .unwrap();
        let (train, test) = split_train_test(&ds, 0.5, 42).unwrap();
        for side in [&train, &test] {
            for dom in side.domains() {
                let by_class = dom.indices_by_class();
                assert_eq!(by_class[&1].len(), 50);
                assert_eq!(by_class[&2].len(), 50);
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let ds = MultiDomainDataset::new(vec![labeled_domain("a", 20, 3)], 3).unwrap();
        let (tr1, te1) = split_train_test(&ds, 0.5, 9).unwrap();
        let (tr2, te2) = split_train_test(&ds, 0.5, 9).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
    }

    #[test]
    fn split_odd_class_rounds_to_three_four() {
        let ds = MultiDomainDataset::new(vec![labeled_domain("a", 7, 1)], 1).unwrap();
        let (train, test) = split_train_test(&ds, 0.5, 1).unwrap();
        let sizes = {
            let mut s = vec![train.domains()[0].len(), test.domains()[0].len()];
            s.sort_unstable();
            s
        };
        assert_eq!(sizes, vec![3, 4]);
        assert_eq!(train.domains()[0].len() + test.domains()[0].len(), 7);
    }

    #[test]
    fn split_partition_is_exact_and_disjoint() {
        let ds = MultiDomainDataset::new(vec![labeled_domain("a", 13, 3)], 3).unwrap();
        let (train, test) = split_train_test(&ds, 0.3, 5).unwrap();
        // Reconstruct multisets of column values; union must equal original.
        let col_key = |dom: &DomainDataset, j: usize| {
            (dom.features()[[0, j]].to_bits(), dom.features()[[1, j]].to_bits())
        };
        let mut seen = BTreeSet::new();
        for side in [&train, &test] {
            for j in 0..side.domains()[0].len() {
                assert!(seen.insert(col_key(&side.domains()[0], j)), "overlap");
            }
        }
        assert_eq!(seen.len(), 39);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let dom = DomainDataset::new(
            "a",
            array![[0.0, 1.0, 2.0]],
            vec![Some(1), Some(1), Some(2)],
            "",
        )
        .unwrap();
        let ds = MultiDomainDataset::new(vec![dom], 2).unwrap();
        let err = split_train_test(&ds, 0.5, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("class 2") && msg.contains("'a'"), "{msg}");
    }

    #[test]
    fn subsample_keeps_exact_counts_and_marks_rest_unlabeled() {
        let ds = MultiDomainDataset::new(
            vec![labeled_domain("a", 20, 3), labeled_domain("b", 20, 3)],
            3,
        )
        .unwrap();
        let counts =
            BTreeMap::from([("a".to_string(), 20usize), ("b".to_string(), 5usize)]);
        let out = subsample_labeled(&ds, &counts, 11).unwrap();
        let a = &out.domains()[0];
        let b = &out.domains()[1];
        assert_eq!(a.labeled_count(), 60);
        for (_, idx) in b.indices_by_class() {
            assert_eq!(idx.len(), 5);
        }
        assert_eq!(b.len(), 60); // samples retained, just unlabeled
    }

    #[test]
    fn subsample_zero_means_all_unlabeled() {
        let ds = MultiDomainDataset::new(vec![labeled_domain("a", 4, 2)], 2).unwrap();
        let counts = BTreeMap::from([("a".to_string(), 0usize)]);
        let out = subsample_labeled(&ds, &counts, 3).unwrap();
        assert_eq!(out.domains()[0].labeled_count(), 0);
        assert_eq!(out.domains()[0].len(), 8);
    }

    #[test]
    fn subsample_draws_nest() {
        let ds = MultiDomainDataset::new(vec![labeled_domain("a", 30, 2)], 2).unwrap();
        for seed in [0u64, 1, 99] {
            let small = subsample_labeled(
                &ds,
                &BTreeMap::from([("a".to_string(), 10usize)]),
                seed,
            )
            .unwrap();
            let big = subsample_labeled(
                &ds,
                &BTreeMap::from([("a".to_string(), 20usize)]),
                seed,
            )
            .unwrap();
            for i in 0..ds.domains()[0].len() {
                if small.domains()[0].labels()[i].is_some() {
                    assert_eq!(
                        big.domains()[0].labels()[i],
                        small.domains()[0].labels()[i],
                        "seed {seed}, sample {i}: 10-draw not nested in 20-draw"
                    );
                }
            }
        }
    }

    #[test]
    fn subsample_shortfall_reports_details() {
        let ds = MultiDomainDataset::new(vec![labeled_domain("a", 3, 2)], 2).unwrap();
        let counts = BTreeMap::from([("a".to_string(), 5usize)]);
        let err = subsample_labeled(&ds, &counts, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("short by 2"), "{msg}");
    }
}
