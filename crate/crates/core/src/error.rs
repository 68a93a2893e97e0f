use std::path::PathBuf;

use crate::hand::ChannelId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// A fitted moment-arm table grows with opening angle.
    #[error("moment arm increases with angle at {angles_deg:?} deg")]
    NonMonotoneArm { angles_deg: Vec<f64> },

    #[error("channel {channel}: {source}")]
    Channel {
        channel: ChannelId,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected major {expected})")]
    Version { found: String, expected: u32 },

    /// Config problem, located by file and 1-based line when known.
    #[error("{}{}: {message}", .path.display(), .line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    /// A malformed data file, located by 1-based line.
    #[error("{}:{line}: {source}", .path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("channel busy: {0}")]
    ChannelBusy(ChannelId),

    #[error("hardware fault on {channel}: {detail}")]
    HardwareFault { channel: ChannelId, detail: String },

    #[error("no grasp: {0}")]
    NoGrasp(String),

    #[error("unknown entry `{0}`")]
    UnknownEntry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn at_line(self, path: &std::path::Path, line: usize) -> Self {
        Error::Malformed {
            path: path.to_path_buf(),
            line,
            source: Box::new(self),
        }
    }

    pub(crate) fn on_channel(self, channel: ChannelId) -> Self {
        Error::Channel {
            channel,
            source: Box::new(self),
        }
    }
}
