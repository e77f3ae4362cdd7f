use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("case file is missing required table mpc.{0}")]
    MissingTable(&'static str),

    #[error("mpc.{table} row {row}: expected {expected} columns, found {found}")]
    InconsistentRow {
        table: &'static str,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid case data: {0}")]
    InvalidCase(String),

    #[error("network is islanded: {components} connected components after status filtering")]
    IslandedNetwork { components: usize },

    #[error("branch {branch} has zero reactance")]
    ZeroReactance { branch: usize },

    #[error("reduced bus susceptance matrix is singular")]
    SingularReducedLaplacian,

    #[error("only {found} linearly independent active rows, {needed} required")]
    RankDeficient { found: usize, needed: usize },

    #[error("basis matrix is singular")]
    SingularBasis,

    #[error("numerical failure in LP solver: {0}")]
    NumericalFailure(String),

    #[error("no ensemble member is feasible for this scenario")]
    NoFeasibleBasis,

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("trace has {available} window records, {needed} required")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("window of {window} samples is below the required {required}")]
    WindowTooSmall { window: usize, required: usize },

    #[error("ensemble was built for {found}, expected {expected}")]
    EnsembleCaseMismatch { expected: String, found: String },

    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
