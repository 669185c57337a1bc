use thiserror::Error;

use crate::map::StreetId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown entity id {0}")]
    UnknownEntity(usize),

    #[error("unknown street {0}")]
    UnknownStreet(StreetId),

    #[error("unknown test function `{0}`")]
    UnknownTestFunction(String),

    #[error("degenerate density profile: {0}")]
    DegenerateProfile(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
