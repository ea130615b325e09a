use thiserror::Error;

/// Which of the two coupled systems a failure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemLabel {
    SecondOrder,
    Limit,
    Unscaled,
}

impl std::fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SystemLabel::SecondOrder => "second-order",
            SystemLabel::Limit => "limit",
            SystemLabel::Unscaled => "unscaled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite kernel argument {0}")]
    Domain(f64),

    #[error("covariance factorization failed (smallest pivot {pivot:e}) after diagonal jitter")]
    Conditioning { pivot: f64 },

    #[error("{system} system diverged at particle {particle}, step {step}")]
    Divergence {
        system: SystemLabel,
        particle: usize,
        step: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("study aborted at beta = {beta}: {source}")]
    Study {
        beta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
