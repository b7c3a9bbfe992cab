//! HTTP service for live trial conduct.
//!
//! Sessions are event sourced: every change is one line in an append-only
//! JSONL file, and the in-memory state is rebuilt by replaying those lines
//! through the same decision path that served them. Recommendations come
//! from [`boin_designs::recommend`], as in the `boin next-dose` command.

pub mod api;
pub mod error;
mod routes;
pub mod session;
mod store;

pub use api::SCHEMA_VERSION;
pub use error::{ApiError, ErrorBody};
pub use routes::{router, AppState, IDEMPOTENCY_HEADER};
pub use session::Session;
pub use store::Store;
