use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent run description. `line` is 1-based when the
    /// error can be traced to a line of a configuration file.
    #[error("configuration error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("adiabatic states degenerate at R = {position}: gap {gap:e} below floor")]
    Degenerate { position: f64, gap: f64 },

    #[error("numerical abort at step {step}{}: {message}", trajectory.map(|i| format!(", trajectory {i}")).unwrap_or_default())]
    Numerical {
        step: usize,
        trajectory: Option<usize>,
        message: String,
    },

    #[error("incompatible runs: {0}")]
    Incompatible(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Data { path: String, message: String },
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            message: message.into(),
        }
    }

    pub fn config_at(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn data(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }

    /// Stable machine-readable category, also used for process exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Degenerate { .. } | Error::Numerical { .. } => "numerical",
            Error::Incompatible(_) => "incompatible",
            Error::Io { .. } => "io",
            Error::Data { .. } => "data",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "numerical" => 3,
            _ => 1,
        }
    }
}
