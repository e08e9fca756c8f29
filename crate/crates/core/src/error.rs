use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown column {name} (candidates: {})", candidates.join(", "))]
    UnknownColumn { name: String, candidates: Vec<String> },

    #[error("unknown table {0}")]
    UnknownTable(String),

    #[error("unknown query {0}")]
    UnknownQuery(String),

    #[error("table {table} does not match its schema at column {column}: {reason}")]
    SchemaMismatch { table: String, column: String, reason: String },

    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("not an FBC file: {0}")]
    NotFbc(String),

    #[error("corrupt column {0}")]
    CorruptColumn(String),

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("type error: {0}")]
    Type(String),

    #[error("unknown UDF {0}")]
    UnknownUdf(String),

    #[error("UDF {name}: {message}")]
    Udf { name: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integer overflow")]
    Overflow,

    #[error("toolchain not found: `{command}` (set FLARELITE_CC or `command` in the toolchain config)")]
    ToolchainNotFound { command: String },

    #[error("toolchain failed (source dumped to {}):\n{diagnostics}", source_path.display())]
    CompileFailed { diagnostics: String, source_path: PathBuf },

    #[error("toolchain timed out after {0} s")]
    ToolchainTimeout(u64),

    #[error("native kernel: {0}")]
    Native(String),

    #[error("invalid run configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn ty(msg: impl Into<String>) -> Self {
        Error::Type(msg.into())
    }
}
