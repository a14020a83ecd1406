//! Graph adversarial diffusion: modified transition matrices, a truncated
//! diffusion series, noise and structure perturbation, small classifier heads
//! and the experiment harness that ties them together.
//!
//! The pipeline is decoupled. Features are aggregated once with
//! [`diffuse_features`] and a head is then trained on the result with
//! [`train_head`].

pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod features;
pub mod graph;
pub mod harness;
pub mod io;
pub mod model;
pub mod perturb;
pub mod seed;
pub mod sparse;
pub mod transition;
pub mod verify;

pub use dataset::{stratified_split, LabeledDataset, Split, Splits};
pub use diffusion::{
    closed_form_oracle, connectivity_factor, diffuse_features, empirical_noise_norm, materialize_s, noise_bound,
    residual_norm, self_consistency_residual, DiffusionConfig, DiffusionReport,
};
pub use error::{Error, Result};
pub use features::{row_normalize_features, FeatureMatrix};
pub use graph::{add_self_loops, laplacian, load_graph, normalize, Graph, NormKind, NormalizedAdjacency};
pub use model::{evaluate, forward, gradient_check, train_head, HeadConfig, HeadKind, TrainedHead};
pub use perturb::{
    add_flip_noise, add_gaussian_noise, generate_gallery, generate_sbm, perturb_structure, Gallery, NoiseKind,
    NoiseSpec, PerturbMode, SbmSpec,
};
pub use sparse::CsrMatrix;
pub use transition::{
    build_transition, compute_phi, phi_option1, phi_option2, phi_option3, reconstruct_option4, Operator, Phi,
    TransitionMatrix, TransitionOption,
};
