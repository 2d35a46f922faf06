//! Representative-sample selection via bisecting k-means.
//!
//! Starting from a single cluster, the cluster with the largest
//! within-cluster sum of squares is repeatedly split by 2-means (10
//! seeded restarts, best split kept) until the requested number of
//! clusters exists. The cluster centroids then serve as a uniform set of
//! unlabeled samples for graph construction.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeding::rng_for;

const RESTARTS: usize = 10;
const MAX_LLOYD_ITERS: usize = 100;

/// Cluster centroids plus the cluster id assigned to every input sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    points: Array2<f64>,
    assignment: Vec<usize>,
}

impl CentroidSet {
    /// `d × u` matrix, one centroid per column.
    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    /// Cluster id per input sample, in input order.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }
}

fn centroid(features: ArrayView2<'_, f64>, members: &[usize]) -> Array1<f64> {
    let mut mean = Array1::<f64>::zeros(features.nrows());
    for &j in members {
        mean += &features.column(j);
    }
    mean / members.len() as f64
}

fn sse(features: ArrayView2<'_, f64>, members: &[usize], center: &Array1<f64>) -> f64 {
    members
        .iter()
        .map(|&j| {
            features
                .column(j)
                .iter()
                .zip(center.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// One 2-means run from two distinct member positions. Returns the two
/// member lists and the split SSE, or `None` if a side collapses.
fn two_means(
    features: ArrayView2<'_, f64>,
    members: &[usize],
    init: (usize, usize),
) -> Option<(Vec<usize>, Vec<usize>, f64)> {
    let mut c0 = features.column(members[init.0]).to_owned();
    let mut c1 = features.column(members[init.1]).to_owned();
    let mut side = vec![0u8; members.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for (pos, &j) in members.iter().enumerate() {
            let col = features.column(j);
            let d0: f64 = col.iter().zip(c0.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let d1: f64 = col.iter().zip(c1.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let want = u8::from(d1 < d0);
            if side[pos] != want {
                side[pos] = want;
                changed = true;
            }
        }
        let a: Vec<usize> =
            members.iter().enumerate().filter(|(p, _)| side[*p] == 0).map(|(_, &j)| j).collect();
        let b: Vec<usize> =
            members.iter().enumerate().filter(|(p, _)| side[*p] == 1).map(|(_, &j)| j).collect();
        if a.is_empty() || b.is_empty() {
            return None;
        }
        c0 = centroid(features, &a);
        c1 = centroid(features, &b);
        if !changed {
            let total = sse(features, &a, &c0) + sse(features, &b, &c1);
            return Some((a, b, total));
        }
    }
    let a: Vec<usize> =
        members.iter().enumerate().filter(|(p, _)| side[*p] == 0).map(|(_, &j)| j).collect();
    let b: Vec<usize> =
        members.iter().enumerate().filter(|(p, _)| side[*p] == 1).map(|(_, &j)| j).collect();
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let total = sse(features, &a, &c0) + sse(features, &b, &c1);
    Some((a, b, total))
}

fn bisect(
    features: ArrayView2<'_, f64>,
    members: &[usize],
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let i1 = rng.random_range(0..members.len());
        let mut i2 = rng.random_range(0..members.len() - 1);
        if i2 >= i1 {
            i2 += 1;
        }
        if let Some(split) = two_means(features, members, (i1, i2)) {
            let better = match &best {
                Some((_, _, s)) => split.2 < *s,
                None => true,
            };
            if better {
                best = Some(split);
            }
        }
    }
    match best {
        Some((a, b, _)) => (a, b),
        // All restarts collapsed (duplicate points): peel off the first member.
        None => (vec![members[0]], members[1..].to_vec()),
    }
}

/// Bisecting k-means down to exactly `u` clusters.
///
/// Splits always pick the cluster with the largest SSE among those with at
/// least two members (ties to the lowest cluster id), so the cluster count
/// after `t` bisections is exactly `1 + t`. Deterministic per seed.
pub fn bisecting_kmeans(features: ArrayView2<'_, f64>, u: usize, seed: u64) -> Result<CentroidSet> {
    let n = features.ncols();
    if u == 0 {
        return Err(Error::Parameter("cluster count must be at least 1".into()));
    }
    if u > n {
        return Err(Error::Parameter(format!(
            "cannot form {u} clusters from {n} samples"
        )));
    }

    let mut rng = rng_for(seed, &["bisecting-kmeans"]);
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    while clusters.len() < u {
        let split_idx = clusters
            .iter()
            .enumerate()
            .filter(|(_, members)| members.len() >= 2)
            .map(|(idx, members)| {
                let c = centroid(features, members);
                (idx, sse(features, members, &c))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(idx, _)| idx)
            .expect("a splittable cluster exists while clusters < u <= n");
        let members = clusters[split_idx].clone();
        let (a, b) = bisect(features, &members, &mut rng);
        clusters[split_idx] = a;
        clusters.push(b);
    }

    let mut points = Array2::<f64>::zeros((features.nrows(), u));
    let mut assignment = vec![0usize; n];
    for (cid, members) in clusters.iter().enumerate() {
        let c = centroid(features, members);
        points.column_mut(cid).assign(&c);
        for &j in members {
            assignment[j] = cid;
        }
    }
    Ok(CentroidSet { points, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn blob(center: (f64, f64), n: usize, sd: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                (
                    center.0 + sd * (rng.random_range(-1.0..1.0_f64)),
                    center.1 + sd * (rng.random_range(-1.0..1.0_f64)),
                )
            })
            .collect()
    }

    fn to_matrix(points: &[(f64, f64)]) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((2, points.len()));
        for (j, (x, y)) in points.iter().enumerate() {
            m[[0, j]] = *x;
            m[[1, j]] = *y;
        }
        m
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let m = to_matrix(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0)]);
        let cs = bisecting_kmeans(m.view(), 1, 0).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs.points()[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((cs.points()[[1, 0]] - 1.0).abs() < 1e-12);
        assert!(cs.assignment().iter().all(|&c| c == 0));
    }

    #[test]
    fn two_blobs_recover_their_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n_blob = 200;
        let sd = 0.3;
        let mut pts = blob((0.0, 0.0), n_blob, sd, &mut rng);
        pts.extend(blob((10.0, 10.0), n_blob, sd, &mut rng));
        let m = to_matrix(&pts);
        let cs = bisecting_kmeans(m.view(), 2, 9).unwrap();

        // Oracle: the true per-blob means.
        let mean_of = |range: std::ops::Range<usize>| {
            let mut mx = 0.0;
            let mut my = 0.0;
            for j in range.clone() {
                mx += m[[0, j]];
                my += m[[1, j]];
            }
            (mx / range.len() as f64, my / range.len() as f64)
        };
        let m1 = mean_of(0..n_blob);
        let m2 = mean_of(n_blob..2 * n_blob);
        let tol = 3.0 * sd / (n_blob as f64).sqrt();

        let mut found1 = false;
        let mut found2 = false;
        for c in 0..2 {
            let (cx, cy) = (cs.points()[[0, c]], cs.points()[[1, c]]);
            if (cx - m1.0).hypot(cy - m1.1) < tol {
                found1 = true;
            }
            if (cx - m2.0).hypot(cy - m2.1) < tol {
                found2 = true;
            }
        }
        assert!(found1 && found2, "centroids missed the blob means");
    }

    #[test]
    fn u_equals_n_isolates_every_point() {
        let m = to_matrix(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (3.0, 3.0), (5.0, 1.0)]);
        let cs = bisecting_kmeans(m.view(), 5, 2).unwrap();
        assert_eq!(cs.len(), 5);
        let mut seen = vec![false; 5];
        for &c in cs.assignment() {
            assert!(!seen[c], "assignment must be a bijection");
            seen[c] = true;
        }
        // Each centroid equals its single member.
        for j in 0..5 {
            let c = cs.assignment()[j];
            assert_eq!(m.column(j), cs.points().column(c));
        }
    }

    #[test]
    fn centroids_are_member_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = blob((1.0, -2.0), 60, 2.0, &mut rng);
        let m = to_matrix(&pts);
        let cs = bisecting_kmeans(m.view(), 7, 4).unwrap();
        for c in 0..7 {
            let members: Vec<usize> =
                (0..60).filter(|&j| cs.assignment()[j] == c).collect();
            assert!(!members.is_empty());
            let mean = centroid(m.view(), &members);
            for (got, want) in cs.points().column(c).iter().zip(mean.iter()) {
                assert!((got - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sse_non_increasing_in_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = blob((0.0, 0.0), 80, 3.0, &mut rng);
        let m = to_matrix(&pts);
        let total_sse = |cs: &CentroidSet| -> f64 {
            (0..80)
                .map(|j| {
                    let c = cs.assignment()[j];
                    m.column(j)
                        .iter()
                        .zip(cs.points().column(c).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum()
        };
        let mut prev = f64::INFINITY;
        for u in 1..=20 {
            let cs = bisecting_kmeans(m.view(), u, 21).unwrap();
            let s = total_sse(&cs);
            assert!(s <= prev + 1e-9, "SSE rose from {prev} to {s} at u = {u}");
            prev = s;
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = blob((0.0, 0.0), 50, 1.5, &mut rng);
        let m = to_matrix(&pts);
        let a = bisecting_kmeans(m.view(), 12, 99).unwrap();
        let b = bisecting_kmeans(m.view(), 12, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_still_split() {
        let m = to_matrix(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let cs = bisecting_kmeans(m.view(), 3, 0).unwrap();
        assert_eq!(cs.len(), 3);
    }

    #[test]
    fn u_larger_than_n_rejected() {
        let m = to_matrix(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(bisecting_kmeans(m.view(), 3, 0).is_err());
    }
}
