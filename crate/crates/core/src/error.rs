use std::io;

/// Errors produced by the cogload pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad magic, unsupported version or otherwise unparseable file.
    #[error("format error: {0}")]
    Format(String),
    /// The file parsed but its payload is truncated or inconsistent.
    #[error("corrupt data: {0}")]
    Corruption(String),
    /// An input violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// The requested configuration cannot be executed.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical routine failed (non-finite values, failed factorization).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// An error raised inside a named pipeline stage.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 2,
            Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_root_cause() {
        assert_eq!(Error::config("x").exit_code(), 2);
        assert_eq!(Error::validation("x").exit_code(), 3);
        assert_eq!(Error::Format("x".into()).exit_code(), 3);
        assert_eq!(Error::numerical("x").exit_code(), 4);
        let wrapped = Error::numerical("nan").in_stage("train-ubm").in_stage("run");
        assert_eq!(wrapped.exit_code(), 4);
        assert!(wrapped.to_string().contains("train-ubm"));
    }
}
