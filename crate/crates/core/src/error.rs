use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cell ({row}, {col}) outside {rows}x{cols} subarray")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("column {0} addressed twice in one write step")]
    DuplicateColumn(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid float layout: {0}")]
    Layout(String),
    #[error("unsupported value: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("network spec error: {0}")]
    Spec(String),
    #[error("parse error: {0}")]
    Parse(String),
}
