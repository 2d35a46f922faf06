//! Synthetic two-spiral domains with affine deformations.
//!
//! [`make_spiral_pair`] builds a two-domain dataset: domain `spiral1` is an
//! Archimedean spiral sampled uniformly along its arc, domain `spiral2` is a
//! fresh draw from the same generator passed through a [`Deformation`]
//! (scale, then rotate, then translate). Classes partition the spiral into
//! contiguous equal-arc-length bands, so class bands correspond across the
//! two domains by construction.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DomainDataset, MultiDomainDataset};
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Similarity transform `x ↦ s·R(θ)·x + t` (scale, then rotate, then translate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deformation {
    scale: f64,
    rotation_deg: f64,
    translation: [f64; 2],
}

impl Deformation {
    pub fn new(scale: f64, rotation_deg: f64, translation: [f64; 2]) -> Self {
        assert!(scale > 0.0, "scale must be positive, got {scale}");
        Self { scale, rotation_deg, translation }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, [0.0, 0.0])
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation_deg(&self) -> f64 {
        self.rotation_deg
    }

    pub fn translation(&self) -> [f64; 2] {
        self.translation
    }

    fn rotation_matrix(&self) -> [[f64; 2]; 2] {
        let theta = self.rotation_deg.to_radians();
        let (sin, cos) = theta.sin_cos();
        [[cos, -sin], [sin, cos]]
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        let r = self.rotation_matrix();
        (
            self.scale * (r[0][0] * x + r[0][1] * y) + self.translation[0],
            self.scale * (r[1][0] * x + r[1][1] * y) + self.translation[1],
        )
    }

    /// The transform undoing this one; exists for every positive scale.
    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let theta = (-self.rotation_deg).to_radians();
        let (sin, cos) = theta.sin_cos();
        let tx = -inv_scale * (cos * self.translation[0] - sin * self.translation[1]);
        let ty = -inv_scale * (sin * self.translation[0] + cos * self.translation[1]);
        Self { scale: inv_scale, rotation_deg: -self.rotation_deg, translation: [tx, ty] }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Deformation) -> Self {
        let r = self.rotation_matrix();
        let t1 = first.translation;
        let tx = self.scale * (r[0][0] * t1[0] + r[0][1] * t1[1]) + self.translation[0];
        let ty = self.scale * (r[1][0] * t1[0] + r[1][1] * t1[1]) + self.translation[1];
        Self {
            scale: self.scale * first.scale,
            rotation_deg: self.rotation_deg + first.rotation_deg,
            translation: [tx, ty],
        }
    }
}

/// Transforms every column of a 2×n point matrix.
pub fn apply_deformation(points: &Array2<f64>, deform: &Deformation) -> Result<Array2<f64>> {
    if points.nrows() != 2 {
        return Err(Error::Validation(format!(
            "deformations act on 2-row point matrices, got {} rows",
            points.nrows()
        )));
    }
    let mut out = points.to_owned();
    for mut col in out.columns_mut() {
        let (x, y) = deform.apply_point(col[0], col[1]);
        col[0] = x;
        col[1] = y;
    }
    Ok(out)
}

/// Spiral template geometry: radius `a + b·τ` for `τ` across `angle_range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    pub radius_base: f64,
    pub radius_growth: f64,
    pub angle_range: (f64, f64),
}

impl Default for SpiralParams {
    fn default() -> Self {
        Self {
            radius_base: 0.5,
            radius_growth: 0.4,
            angle_range: (0.0, 4.0 * std::f64::consts::PI),
        }
    }
}

impl SpiralParams {
    /// Arc length from `angle_range.0` to `tau`.
    fn arc_length(&self, tau: f64) -> f64 {
        // ∫ √((a+bu)² + b²) du has the closed form below in r = a + bu.
        let b = self.radius_growth;
        let prim = |r: f64| (r * (r * r + b * b).sqrt() + b * b * (r / b).asinh()) / (2.0 * b);
        prim(self.radius_base + b * tau) - prim(self.radius_base + b * self.angle_range.0)
    }

    /// Inverts `arc_length` by bisection (it is strictly increasing).
    fn tau_at_arc(&self, s: f64) -> f64 {
        let (mut lo, mut hi) = self.angle_range;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.arc_length(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn point_at(&self, tau: f64) -> (f64, f64) {
        let r = self.radius_base + self.radius_growth * tau;
        (r * tau.cos(), r * tau.sin())
    }
}

fn draw_spiral_domain(
    params: &SpiralParams,
    n_per_class: usize,
    classes: u32,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> (Array2<f64>, Vec<Option<u32>>) {
    let n = n_per_class * classes as usize;
    let total_arc = params.arc_length(params.angle_range.1);
    let noise = Normal::new(0.0, noise_sd).expect("valid noise sd");
    let mut points = Array2::<f64>::zeros((2, n));
    let mut labels = Vec::with_capacity(n);
    let mut col = 0;
    for class in 1..=classes {
        let lo = total_arc * (class - 1) as f64 / classes as f64;
        let hi = total_arc * class as f64 / classes as f64;
        for _ in 0..n_per_class {
            let s = rng.random_range(lo..hi);
            let tau = params.tau_at_arc(s);
            let (x, y) = params.point_at(tau);
            points[[0, col]] = x + noise.sample(rng);
            points[[1, col]] = y + noise.sample(rng);
            labels.push(Some(class));
            col += 1;
        }
    }
    (points, labels)
}

/// Two 2-D spiral domains: `spiral1` undeformed, `spiral2` a fresh draw
/// mapped through `deform`. Every sample is labeled; sample order is
/// class-major in both domains, so class bands correspond index-wise.
pub fn make_spiral_pair(
    n_per_class: usize,
    classes: u32,
    noise_sd: f64,
    deform: &Deformation,
    seed: u64,
) -> Result<MultiDomainDataset> {
    make_spiral_pair_with(&SpiralParams::default(), n_per_class, classes, noise_sd, deform, seed)
}

/// [`make_spiral_pair`] with explicit spiral geometry.
pub fn make_spiral_pair_with(
    params: &SpiralParams,
    n_per_class: usize,
    classes: u32,
    noise_sd: f64,
    deform: &Deformation,
    seed: u64,
) -> Result<MultiDomainDataset> {
    if classes < 2 {
        return Err(Error::Parameter(format!("at least 2 classes required, got {classes}")));
    }
    if n_per_class == 0 {
        return Err(Error::Parameter("n_per_class must be at least 1".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::Parameter(format!("noise sd must be nonnegative, got {noise_sd}")));
    }

    let mut rng1 = rng_for(seed, &["spiral", "1"]);
    let (pts1, labels1) = draw_spiral_domain(params, n_per_class, classes, noise_sd, &mut rng1);

    let mut rng2 = rng_for(seed, &["spiral", "2"]);
    let (pts2, labels2) = draw_spiral_domain(params, n_per_class, classes, noise_sd, &mut rng2);
    let pts2 = apply_deformation(&pts2, deform)?;

    let d1 = DomainDataset::new("spiral1", pts1, labels1, "spiral1")?;
    let d2 = DomainDataset::new("spiral2", pts2, labels2, "spiral2")?;
    MultiDomainDataset::new(vec![d1, d2], classes)
}
