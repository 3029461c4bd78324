use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid of {points} points exceeds the budget of {budget}; try points_per_axis = {suggested}")]
    Resource {
        points: u128,
        budget: u64,
        suggested: usize,
    },

    #[error("basis selection failed: best margin {margin:e} is below {threshold:e}")]
    SelectionFailed { margin: f64, threshold: f64 },

    #[error("problem document: {0}")]
    Problem(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
