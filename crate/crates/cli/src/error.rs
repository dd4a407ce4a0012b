use sentiprobe_core::analysis::AnalysisError;
use sentiprobe_core::corpus::CorpusError;
use sentiprobe_core::report::ReportError;
use sentiprobe_core::sat::SatError;
use sentiprobe_core::sst::SstError;
use sentiprobe_core::ScorerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Sst(#[from] SstError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {detail}")]
    Data { path: String, detail: String },
}

impl CliError {
    /// 1 usage or config, 2 data, 3 backend.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Scorer(e) | CliError::Sst(SstError::Scorer(e)) => scorer_code(e),
            _ => 2,
        }
    }
}

fn scorer_code(e: &ScorerError) -> u8 {
    match e {
        ScorerError::InvalidConfig(_)
        | ScorerError::InvalidTemplate { .. }
        | ScorerError::MissingPlaceholder(..) => 1,
        _ => 3,
    }
}
