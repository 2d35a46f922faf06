//! # ssma
//!
//! Semisupervised manifold alignment across data domains.
//!
//! Given several datasets ("domains") that describe the same classes in
//! different feature spaces, this crate learns one linear projector per
//! domain so that all domains map into a shared latent space where
//! same-class samples end up close, different-class samples end up far,
//! and each domain's local neighborhood structure is preserved.
//!
//! The fit reduces to a generalized eigenvalue problem on small `d × d`
//! matrices (`d` = sum of the per-domain feature dimensions), so the
//! method stays cheap even when the sample graphs are large.
//!
//! ## Pipeline
//!
//! | Stage | Module |
//! |-------|--------|
//! | Datasets, labels, joint indexing | [`dataset`] |
//! | Two-spiral synthetic domains | [`synth`] |
//! | kNN / class graphs and Laplacians | [`graphs`] |
//! | Generalized symmetric eigensolver | [`eigen`] |
//! | Projector fit, projection, synthesis | [`alignment`] |
//! | Representative-sample selection | [`sampling`] |
//! | Joint linear classification, kappa | [`evaluate`] |
//! | File formats and experiment configs | [`io`] |
//!
//! ## Quick start
//!
//! ```rust
//! use ssma::alignment::{fit, AlignmentParams};
//! use ssma::synth::{make_spiral_pair, Deformation};
//!
//! let ds = make_spiral_pair(60, 3, 0.05, &Deformation::new(2.0, 90.0, [0.0, 0.0]), 7).unwrap();
//! let model = fit(&ds, &AlignmentParams::default()).unwrap();
//! assert_eq!(model.projector().nrows(), 4); // d = 2 + 2
//! ```

pub mod alignment;
pub mod dataset;
pub mod eigen;
pub mod error;
pub mod evaluate;
pub mod graphs;
pub mod io;
mod linalg;
pub mod sampling;
pub mod seeding;
pub mod synth;

pub use error::{Error, Result};
