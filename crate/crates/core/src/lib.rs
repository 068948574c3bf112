//! Semi-supervised domain adaptation with discrete optimal transport onto a
//! *source fiction* domain.
//!
//! Instead of transporting target samples onto the real source, the pipeline
//! builds a stand-in domain by attacking the labeled target samples *toward
//! their own labels* in the classifier's latent space. Perturbations capped
//! at half the minimal pairwise distance keep that construction cyclically
//! monotone under quadratic cost — the geometric property optimal plans
//! have — so transporting the full target set onto the fiction preserves
//! class structure where plain Euclidean transport may cross classes.
//!
//! The crate provides:
//! - [`dataset`]: weighted labeled point clouds, a synthetic shift
//!   generator, and the CSV interchange format;
//! - [`classifier`]: a small MLP with a designated latent layer and analytic
//!   head gradients;
//! - [`attack`]: the inverse sign-gradient attack and the perturbation bound;
//! - [`monotonicity`]: the brute-force cyclical-monotonicity oracle;
//! - [`ot`]: cost construction and five discrete transport solvers (exact
//!   network simplex, log-domain Sinkhorn, two group-regularized variants,
//!   and a joint linear-map estimator);
//! - [`pipeline`]: the end-to-end adaptation run, epsilon ablation, and the
//!   benchmark harness.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiations.

pub mod attack;
pub mod classifier;
pub mod dataset;
mod error;
pub mod monotonicity;
pub mod ot;
pub mod pipeline;
pub mod rng;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{step_sign, Scalar};

/// `f64` dataset, the default working precision.
pub type Dataset64 = dataset::LabeledDataset<f64>;
/// `f32` dataset.
pub type Dataset32 = dataset::LabeledDataset<f32>;
/// `f64` classifier parameters.
pub type Classifier64 = classifier::ClassifierParams<f64>;
/// `f32` classifier parameters.
pub type Classifier32 = classifier::ClassifierParams<f32>;
/// `f64` transport plan.
pub type Coupling64 = ot::Coupling<f64>;
/// `f32` transport plan.
pub type Coupling32 = ot::Coupling<f32>;
/// `f64` solver output.
pub type TransportResult64 = ot::TransportResult<f64>;
/// `f64` attack configuration.
pub type AttackConfig64 = attack::AttackConfig<f64>;
/// `f64` adaptation configuration.
pub type AdaptationConfig64 = pipeline::AdaptationConfig<f64>;
