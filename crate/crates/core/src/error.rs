//! Error types shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Coarse error category, used by the CLI to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid configuration or arguments (exit code 1).
    Usage,
    /// Bad input data: missing files, parse failures, schema violations,
    /// shape mismatches (exit code 2).
    Data,
    /// Training failures: non-finite losses or gradients, use of an
    /// unfitted model (exit code 3).
    Training,
    /// An evaluation budget was exceeded (exit code 4).
    Budget,
}

impl ErrorClass {
    pub fn exit_code(&self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Training => 3,
            ErrorClass::Budget => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Training => "training",
            ErrorClass::Budget => "budget",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("table has no data rows")]
    EmptyTable,

    #[error("row {row} has {found} cells, expected {expected}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("header does not match schema: {detail}")]
    HeaderMismatch { detail: String },

    #[error("column {column:?}, row {row}: token {token:?} is not a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        token: String,
    },

    #[error("target column {name:?} not found in table")]
    TargetNotFound { name: String },

    #[error("target column {name:?} holds non-numeric values")]
    CategoricalTarget { name: String },

    #[error("column {column:?}, row {row}: missing value")]
    MissingValue { row: usize, column: String },

    #[error("column {column:?}: category {token:?} was not seen when the preprocessor was fitted")]
    UnseenCategory { column: String, token: String },

    #[error("schema mismatch: {detail}")]
    SchemaMismatch { detail: String },

    #[error("duplicate column name {name:?}")]
    DuplicateColumn { name: String },

    #[error("unknown column {name:?}")]
    UnknownColumn { name: String },

    #[error("schema declares no {role} columns")]
    MissingRole { role: &'static str },

    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("model has not been trained (no optimizer step taken)")]
    Untrained,

    #[error("evaluation budget exceeded: {evaluated} of {requested} subsets evaluated")]
    BudgetExceeded { evaluated: u64, requested: u64 },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::NonFinite { .. } | Error::Untrained => ErrorClass::Training,
            Error::BudgetExceeded { .. } => ErrorClass::Budget,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
