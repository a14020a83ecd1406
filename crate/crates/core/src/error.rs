use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input data.
    #[error("input error in {source_name}{}: {message}", location(*.line))]
    Input {
        source_name: String,
        line: Option<usize>,
        message: String,
    },

    /// A dense path was requested above its configured node cap.
    #[error("capacity error: {what} needs n = {n} but the cap is {cap}{}", advice_suffix(.advice))]
    Capacity {
        what: &'static str,
        n: usize,
        cap: usize,
        advice: Option<&'static str>,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// An operation was called outside the domain where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

fn advice_suffix(advice: &Option<&'static str>) -> String {
    match advice {
        Some(a) => format!("; {a}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn input(source_name: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Input {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
