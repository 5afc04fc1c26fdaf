//! Minority-class text augmentation and its evaluation.
//!
//! Pipeline pieces: corpus ingestion and balancing, prompt-based and
//! backtranslation augmentation through pluggable providers, TF-IDF
//! features, four classifiers, stratified cross-validation, centroid
//! similarity and t-SNE projections.
//!
//! Numeric modules are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the scalar for common use.

pub mod analysis;
pub mod augment;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod models;
pub mod providers;
pub mod report;
pub mod scalar;

pub use scalar::Scalar;

pub type SparseVector = features::SparseVector<f64>;
pub type TfidfModel = features::TfidfModel<f64>;
pub type TrainedClassifier = models::TrainedClassifier<f64>;
pub type EmbeddingMatrix = analysis::EmbeddingMatrix<f64>;
pub type Affinities = analysis::Affinities<f64>;
pub type Pca = analysis::Pca<f64>;

pub type SparseVectorF32 = features::SparseVector<f32>;
pub type TfidfModelF32 = features::TfidfModel<f32>;
pub type TrainedClassifierF32 = models::TrainedClassifier<f32>;
pub type EmbeddingMatrixF32 = analysis::EmbeddingMatrix<f32>;
pub type AffinitiesF32 = analysis::Affinities<f32>;
pub type PcaF32 = analysis::Pca<f32>;
