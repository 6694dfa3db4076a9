//! Command-line interface and HTTP service for the merger decision-support models.

pub mod cli;
pub mod error;
pub mod grammar;
pub mod http;
pub mod library;
pub mod store;
pub mod sweep_args;

pub use error::{ApiError, ApiResult};
pub use library::{machine, ModelLibrary};
pub use store::{SessionRecord, SessionStore, SessionView};
