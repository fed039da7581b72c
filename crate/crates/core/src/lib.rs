//! SetConv: a permutation-invariant set convolution layer for imbalanced
//! classification, trained episodically against a fixed minority anchor.
//!
//! The crate covers the whole pipeline: dense linear algebra and RNG
//! ([`linalg`]), the layer with its analytic gradient ([`setconv`]),
//! episode sampling and Adam training ([`episodic`]), post-training and
//! inference ([`classifier`]), evaluation ([`metrics`]) and data handling
//! ([`data`]).

pub mod classifier;
pub mod data;
pub mod episodic;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod setconv;

pub use classifier::{
    load_model, save_model, BinaryClassifier, ClassRepresentatives, ModelBody, ModelFile,
    ModelMetadata, OneVsAllModel, TrainedModel,
};
pub use data::{Dataset, Split, SynthSpec};
pub use episodic::{LossRecord, TrainConfig};
pub use error::{Error, Result};
pub use linalg::{Matrix, Permutation, Rng, Vector};
pub use metrics::{ClassMetrics, ConfusionMatrix, MetricsReport, Role};
pub use setconv::{Anchor, SetConvParams};
