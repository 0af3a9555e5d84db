//! Learning a thinking hierarchy over crowd answers.
//!
//! Respondents answer a question and predict what others will answer. The counts
//! of (answer, prediction) pairs form a square matrix; ranking answers so that the
//! matrix is as close to upper-triangular as possible puts the answers of more
//! sophisticated respondents, who anticipate the others, at the top.
//!
//! - [`model`]: the generative model, its exact joint matrix and a seeded simulator.
//! - [`ingest`]: response CSV parsing, answer canonicalization and tabulation.
//! - [`rank`]: the exact default ranker (subset DP) and the clustered variant
//!   (set-partition search), each with a brute-force oracle.
//! - [`diagnostics`]: lack-of-fit, the plurality baseline and batch evaluation.
//! - [`report`]: JSON reports and heatmap grids.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod model;
pub mod partition;
pub mod rank;
pub mod report;

pub use config::{Algorithm, Caps, PSource, RunConfig};
pub use diagnostics::{evaluate, lack_of_fit, lemma3_identity_check, plurality, EvalResult, FitReport, Question};
pub use error::{Error, Result};
pub use ingest::{
    build_matrix, canonicalize, normalize, AnswerPredictionMatrix, CanonicalizationMap, IngestOptions,
    PredictionPolicy, ResponseRecord,
};
pub use model::{compute_joint, expected_matrix_proportionality, sample_dataset, JointMatrix, PredictionCount, ThinkingModel};
pub use rank::{rank_brute_force, rank_default, rank_variant, variant_brute_force, AnswerMatrix, ClusterHierarchy, Ranking};
pub use report::{analyze, Analysis, DisplayDiagonal, HeatmapGrid, RankReport};
