//! Infrastructure errors shared by all pluggable backends (checker, prover,
//! judge, simplifier). A `BackendError` is distinct from a negative domain
//! result: a proof that fails to verify is a `fail` verdict, a checker
//! process that cannot be spawned is a `BackendError`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("failed to launch backend `{command}`: {detail}")]
    Launch { command: String, detail: String },
    #[error("backend i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("http request to {url} failed: {detail}")]
    Http { url: String, detail: String },
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("backend configuration error: {0}")]
    Config(String),
}
