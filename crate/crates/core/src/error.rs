use thiserror::Error;

use crate::eval::EvalError;
use crate::formula::{ParseError, TypeError};
use crate::highlight::HighlightError;
use crate::rerank::RerankError;
use crate::service::ServiceError;
use crate::sql::SqlError;
use crate::table::TableError;

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Highlight(#[from] HighlightError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl Error {
    /// True when the error stems from bad input rather than an internal fault.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Table(TableError::Io(_)) => false,
            Error::Sql(SqlError::Engine(_)) => false,
            Error::Service(e) => e.is_user_error(),
            _ => true,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
