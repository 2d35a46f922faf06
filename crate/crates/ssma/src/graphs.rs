//! Affinity graphs and Laplacians.
//!
//! Three graph families drive the alignment:
//!
//! - per-domain geometry graphs `W_g^m` (binary kNN adjacency),
//! - a class-similarity graph `W_s` over the joint sample axis
//!   (1 where both samples are labeled with the same class),
//! - a class-dissimilarity graph `W_d` (1 where both are labeled with
//!   different classes).
//!
//! Unlabeled samples never appear in `W_s`/`W_d`. Before the quotient
//! matrices are assembled the three graphs are rescaled to a common
//! Frobenius norm so each term carries comparable energy.

use ndarray::{Array2, ArrayView2};

use crate::dataset::MultiDomainDataset;
use crate::error::{Error, Result};

/// Symmetric nonnegative affinity matrix with zero diagonal, stored as
/// canonical `i < j` edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    size: usize,
    edges: Vec<(u32, u32, f64)>,
}

impl SparseGraph {
    /// Builds a graph from (i, j, weight) entries. Entries are canonicalized
    /// to `i < j`; duplicates of the same pair must agree in weight.
    pub fn from_edges(size: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut edges: Vec<(u32, u32, f64)> = Vec::new();
        for (i, j, w) in entries {
            if i >= size || j >= size {
                return Err(Error::Validation(format!(
                    "edge ({i}, {j}) out of bounds for graph of size {size}"
                )));
            }
            if i == j {
                return Err(Error::Validation(format!("self-loop at node {i}")));
            }
            if !(w >= 0.0) {
                return Err(Error::Validation(format!("negative weight {w} on edge ({i}, {j})")));
            }
            if w == 0.0 {
                continue;
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            edges.push((a as u32, b as u32, w));
        }
        edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        edges.dedup_by(|next, prev| {
            if next.0 == prev.0 && next.1 == prev.1 {
                debug_assert_eq!(next.2, prev.2, "conflicting duplicate edge weights");
                true
            } else {
                false
            }
        });
        Ok(Self { size, edges })
    }

    pub fn empty(size: usize) -> Self {
        Self { size, edges: Vec::new() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Canonical `i < j` edges.
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_zero(&self) -> bool {
        self.edges.is_empty()
    }

    /// Frobenius norm of the full symmetric matrix.
    pub fn fro_norm(&self) -> f64 {
        (2.0 * self.edges.iter().map(|(_, _, w)| w * w).sum::<f64>()).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            size: self.size,
            edges: self.edges.iter().map(|&(i, j, w)| (i, j, w * factor)).collect(),
        }
    }

    /// Node degrees (row sums of the symmetric matrix).
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.size];
        for &(i, j, w) in &self.edges {
            deg[i as usize] += w;
            deg[j as usize] += w;
        }
        deg
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.size, self.size));
        for &(i, j, w) in &self.edges {
            m[[i as usize, j as usize]] = w;
            m[[j as usize, i as usize]] = w;
        }
        m
    }

    /// Block-diagonal union; node indices are offset by the preceding sizes.
    pub fn block_diag(parts: &[SparseGraph]) -> Self {
        let size = parts.iter().map(|g| g.size).sum();
        let mut edges = Vec::with_capacity(parts.iter().map(|g| g.edges.len()).sum());
        let mut offset = 0u32;
        for part in parts {
            for &(i, j, w) in &part.edges {
                edges.push((i + offset, j + offset, w));
            }
            offset += part.size as u32;
        }
        Self { size, edges }
    }
}

/// Graph Laplacian `L = U − W` with `U` the diagonal degree matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    adjacency: SparseGraph,
    degrees: Vec<f64>,
}

impl Laplacian {
    pub fn size(&self) -> usize {
        self.adjacency.size()
    }

    pub fn adjacency(&self) -> &SparseGraph {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = self.adjacency.to_dense().mapv(|w| -w);
        for (i, &d) in self.degrees.iter().enumerate() {
            m[[i, i]] += d;
        }
        m
    }

    /// Quadratic form `xᵀ L x = ½ Σ_ij W(i,j) (x_i − x_j)²`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.size());
        self.adjacency
            .edges()
            .iter()
            .map(|&(i, j, w)| {
                let d = x[i as usize] - x[j as usize];
                w * d * d
            })
            .sum()
    }
}

/// Directed k-nearest-neighbor lists under Euclidean distance, self
/// excluded, distance ties broken by ascending sample index.
pub fn knn_neighbors(features: ArrayView2<'_, f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = features.ncols();
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if k >= n {
        return Err(Error::Parameter(format!(
            "k = {k} must be smaller than the sample count {n}"
        )));
    }
    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let xi = features.column(i);
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let xj = features.column(j);
                let d2: f64 = xi.iter().zip(xj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, j)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        lists.push(dists.into_iter().take(k).map(|(_, j)| j).collect());
    }
    Ok(lists)
}

/// Binary kNN affinity graph, symmetrized by union: an edge exists when
/// either endpoint lists the other among its k nearest neighbors.
pub fn knn_graph(features: ArrayView2<'_, f64>, k: usize) -> Result<SparseGraph> {
    let lists = knn_neighbors(features, k)?;
    let n = features.ncols();
    let mut present = std::collections::BTreeSet::new();
    for (i, neighbors) in lists.iter().enumerate() {
        for &j in neighbors {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            present.insert((a, b));
        }
    }
    SparseGraph::from_edges(n, present.into_iter().map(|(a, b)| (a, b, 1.0)))
}

/// Class-similarity and class-dissimilarity graphs over the joint sample
/// axis. Both span all domain pairs, including within-domain pairs; rows
/// and columns of unlabeled samples are entirely zero.
pub fn class_graphs(ds: &MultiDomainDataset) -> Result<(SparseGraph, SparseGraph)> {
    let labels = ds.joint_labels();
    let labeled: Vec<(usize, u32)> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|c| (i, c)))
        .collect();
    let distinct: std::collections::BTreeSet<u32> = labeled.iter().map(|&(_, c)| c).collect();
    if distinct.len() < 2 {
        return Err(Error::Labels(format!(
            "class graphs need labeled samples from at least 2 classes, found {}",
            distinct.len()
        )));
    }
    let n = ds.n_total();
    let mut same = Vec::new();
    let mut diff = Vec::new();
    for (a, &(i, ci)) in labeled.iter().enumerate() {
        for &(j, cj) in labeled.iter().skip(a + 1) {
            if ci == cj {
                same.push((i, j, 1.0));
            } else {
                diff.push((i, j, 1.0));
            }
        }
    }
    Ok((SparseGraph::from_edges(n, same)?, SparseGraph::from_edges(n, diff)?))
}

/// Rescales every graph by a positive scalar so all Frobenius norms equal 1.
pub fn frobenius_rescale(graphs: &[SparseGraph]) -> Result<Vec<SparseGraph>> {
    graphs
        .iter()
        .enumerate()
        .map(|(idx, g)| {
            let norm = g.fro_norm();
            if norm == 0.0 {
                return Err(Error::Validation(format!(
                    "graph {idx} is all-zero and cannot be rescaled to unit Frobenius norm"
                )));
            }
            Ok(g.scaled(1.0 / norm))
        })
        .collect()
}

/// `L = U − W`.
pub fn laplacian(w: &SparseGraph) -> Laplacian {
    Laplacian { degrees: w.degrees(), adjacency: w.clone() }
}

/// Block-diagonal Laplacian over the joint axis; cross-domain entries are
/// exactly zero because no cross-domain edges exist.
pub fn block_diag_geometry_laplacian(parts: &[Laplacian]) -> Laplacian {
    let adjacency =
        SparseGraph::block_diag(&parts.iter().map(|l| l.adjacency.clone()).collect::<Vec<_>>());
    let degrees = parts.iter().flat_map(|l| l.degrees.iter().copied()).collect();
    Laplacian { adjacency, degrees }
}
