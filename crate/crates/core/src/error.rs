use hqfl_ckks::HeError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or inconsistent shapes/dimensions.
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid argument value.
    #[error("input error: {0}")]
    Input(String),
    /// Client/server messages that violate the round protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    He(#[from] HeError),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}
macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::Error::Input(format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use input_err;
