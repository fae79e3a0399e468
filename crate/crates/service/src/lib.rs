//! HTTP front end for batch scoring and leave-one-out diagnostics.
//!
//! Every handler is a pure function of the request body and the immutable
//! server [`Config`](cotagree_core::Config). The same [`Scorer`] backs the
//! HTTP routes and in-process callers, so both paths serialize identical
//! bytes.

mod api;
mod scorer;
mod server;

pub use api::{ApiError, ConfigOverrides, DiagnoseResponse, ErrorBody, Health, ScoreRequest, ScoreResponse};
pub use scorer::Scorer;
pub use server::{bind, router, serve, ADDR_ENV, CONFIG_ENV, DEFAULT_ADDR};
