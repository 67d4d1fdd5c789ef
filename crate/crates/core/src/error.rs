use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Protocol step at which a verifier rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Header,
    Commitments,
    PublishedScores,
    HashBinding,
    Layers,
    PackedOpenings,
    Openings,
    Reconstruction,
}

impl std::fmt::Display for Section {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Section::Header => "header",
            Section::Commitments => "commitments",
            Section::PublishedScores => "published-scores",
            Section::HashBinding => "hash-binding",
            Section::Layers => "layers",
            Section::PackedOpenings => "packed-openings",
            Section::Openings => "openings",
            Section::Reconstruction => "reconstruction",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("witness audit failed: {0}")]
    Audit(String),
    #[error("sumcheck rejected at round {round}: {reason}")]
    Sumcheck { round: usize, reason: String },
    #[error("opening rejected ({kind}): {detail}")]
    Opening { kind: OpeningFailure, detail: String },
    #[error("verification failed in {section}: {check}")]
    Verify { section: Section, check: String },
}

/// Reason a commitment opening was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpeningFailure {
    Merkle,
    Code,
    Evaluation,
    Shape,
}

impl std::fmt::Display for OpeningFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OpeningFailure::Merkle => "merkle",
            OpeningFailure::Code => "code",
            OpeningFailure::Evaluation => "evaluation",
            OpeningFailure::Shape => "shape",
        };
        f.write_str(s)
    }
}

impl Error {
    pub fn verify(section: Section, check: impl Into<String>) -> Self {
        Error::Verify { section, check: check.into() }
    }

    /// Re-labels a lower-level rejection with the protocol section it occurred in.
    pub fn in_section(self, section: Section, what: &str) -> Self {
        match self {
            Error::Verify { .. } => self,
            other => Error::Verify { section, check: format!("{what}: {other}") },
        }
    }
}
