//! Bidirectional topic matching (BTM) for cross-corpus topic model comparison.
//!
//! Two corpora are each modeled with their own topic model. Every document is
//! then assigned to the most similar topic of the *other* model, and the
//! resulting native/cross topic pairs are tallied into pairing strengths. From
//! those strengths the crate derives corpus closeness, uniqueness and alignment
//! factors for both directions, extracts unique topics, and validates the
//! matching against a plain cosine-similarity baseline with Cohen's kappa.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The pipeline
//! and on-disk reports use `f64`; the aliases below name those instantiations.

pub mod cooccur;
pub mod error;
pub mod interchange;
pub mod matcher;
pub mod measures;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod synth;
pub mod topic;
pub mod validate;

pub use cooccur::{count_pairs, outlier_diagnostics, pairing_strengths, Direction, PairCounts, Pool};
pub use error::BtmError;
pub use interchange::{load_bundle, write_bundle, CorpusBundle, OutlierState, TopicMeta};
pub use matcher::{assign_cross_topics, build_assignment_table, cosine_similarity, SourceCorpus};
pub use measures::{classify_relationship, Relationship, SkewLabel};
pub use pipeline::{run_analyze, RunConfig};
pub use scalar::Scalar;
pub use topic::TopicId;
pub use validate::{btm_match, cohens_kappa, cosine_match, MatchMethod};

/// Working precision of the analysis pipeline.
pub type Real = f64;

pub type AssignmentTable = matcher::AssignmentTable<Real>;
pub type StrengthMatrix = cooccur::StrengthMatrix<Real>;
pub type MeasureReport = measures::MeasureReport<Real>;
pub type MatchLabeling = validate::MatchLabeling<Real>;
pub type ValidationReport = validate::ValidationReport<Real>;
pub type AnalysisReport = report::AnalysisReport<Real>;
pub type PlotSegment = report::PlotSegment<Real>;
