use thiserror::Error;

/// Reasons an `agent://` URI or one of its components is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("scheme must be `agent`")]
    BadScheme,
    #[error("invalid trust root: {0}")]
    BadTrustRoot(String),
    #[error("capability path is empty")]
    EmptyCapabilityPath,
    #[error("invalid capability segment: {0}")]
    BadSegment(String),
    #[error("invalid agent id: {0}")]
    BadAgentId(String),
    #[error("uri is {0} octets, limit is {max}", max = crate::MAX_URI_LEN)]
    TooLong(usize),
    #[error("timestamp {0} does not fit in 48 bits")]
    TimestampOverflow(u64),
}

impl ParseError {
    /// Stable error name, as surfaced by the command line tool.
    pub fn name(&self) -> &'static str {
        match self {
            ParseError::BadScheme => "BadScheme",
            ParseError::BadTrustRoot(_) => "BadTrustRoot",
            ParseError::EmptyCapabilityPath => "EmptyCapabilityPath",
            ParseError::BadSegment(_) => "BadSegment",
            ParseError::BadAgentId(_) => "BadAgentId",
            ParseError::TooLong(_) => "TooLong",
            ParseError::TimestampOverflow(_) => "TimestampOverflow",
        }
    }
}
