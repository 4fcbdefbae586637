//! Survey missing-data imputation toolkit.
//!
//! The crate fills holes in tabular survey data by searching for the missing
//! values with a genetic algorithm, scoring candidates with a trained
//! auto-associative model (a multilayer perceptron or a bank of Sugeno fuzzy
//! systems), optionally in a PCA-compressed space, and optionally bounding the
//! search with hot-deck donor statistics. A metrics suite quantifies the
//! global statistical distortion the imputation introduces.
//!
//! Module map:
//!
//! - [`data_model`] — schemas, tables, encoding/normalization, splits,
//!   synthetic data and missingness injection.
//! - [`mlp`] — multilayer perceptron with backpropagation.
//! - [`anfis`] — Sugeno fuzzy inference systems with subtractive clustering.
//! - [`pca`] — principal component analysis (compress / reconstruct).
//! - [`ga`] — real-coded genetic algorithm over box-bounded gene vectors.
//! - [`hotdeck`] — donor matching and search-bound derivation.
//! - [`imputer`] — the imputation engine tying the models together.
//! - [`metrics`] — accuracy scoring and the statistical impact report.
//!
//! All randomness is seeded; identical inputs produce identical outputs
//! regardless of the `parallel` feature or thread count.

pub mod anfis;
pub mod data_model;
pub mod ga;
pub mod hotdeck;
pub mod imputer;
pub mod metrics;
pub mod mlp;
pub mod pca;
pub mod seeding;

pub(crate) mod par;
