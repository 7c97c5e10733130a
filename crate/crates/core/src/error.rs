use thiserror::Error;

use crate::cooccur::CooccurError;
use crate::interchange::BundleError;
use crate::matcher::MatchError;
use crate::measures::MeasureError;
use crate::report::ReportError;
use crate::synth::SynthError;
use crate::validate::ValidateError;

/// Any failure of the analysis pipeline.
#[derive(Debug, Error)]
pub enum BtmError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Cooccur(#[from] CooccurError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl BtmError {
    /// True for broken internal invariants, as opposed to bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            BtmError::Cooccur(CooccurError::SimplexViolation { .. } | CooccurError::Shape)
                | BtmError::Measure(MeasureError::InvariantViolation(_))
                | BtmError::Report(ReportError::MissingDirection(_) | ReportError::UnknownTopic { .. })
        )
    }

    /// Process exit status: 1 for input errors, 2 for invariant violations.
    pub fn exit_code(&self) -> u8 {
        if self.is_invariant_violation() {
            2
        } else {
            1
        }
    }
}
