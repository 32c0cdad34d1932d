use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("episode already finished at step {t} of {horizon}")]
    EpisodeFinished { t: usize, horizon: usize },

    #[error("action {0} outside [-1, 1]")]
    ActionOutOfRange(f64),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("accounting mismatch at step {t}: env grid exchange {env} vs dispatch {dispatch}")]
    ReplayMismatch { t: usize, env: f64, dispatch: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
