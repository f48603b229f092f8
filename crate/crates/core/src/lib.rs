//! Intrinsic dimension estimation from nearest-neighbor distance ratios.
//!
//! The homogeneous estimators live in [`twonn`]; the heterogeneous mixture
//! model and its Gibbs sampler in [`hidalgo`]; postprocessing of its chains in
//! [`posterior`].

pub mod datasets;
pub mod error;
pub mod geometry;
pub mod hidalgo;
pub mod io;
pub mod posterior;
pub mod special;
pub mod twonn;

pub use error::{Error, Result};
pub use geometry::{
    compute_mus, deduplicate, distance_matrix, knn, knn_points, Adjacency, DistanceMatrix, Input,
    Metric, MusOptions, Neighbors, PointCloud, RatioSet,
};
pub use hidalgo::{run_hidalgo, run_hidalgo_on_ratios, HidalgoChains, HidalgoConfig, PriorType};
pub use posterior::{
    cluster_from_psm, fix_label_switching, id_by_class, nn_distance_profile,
    posterior_similarity, summarize_ids, ClassSummary, Linkage, PosteriorSummary,
};
pub use twonn::{
    trim, twonn, twonn_bayes, twonn_linfit, twonn_mle, BayesPosterior, FitExtras, Method,
    TwoNNFit, TwoNNOptions,
};
