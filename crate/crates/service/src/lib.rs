//! HTTP/JSON service over the non-word pipeline.
//!
//! | method | path | body / result |
//! |---|---|---|
//! | POST | `/api/v1/generate` | `{length, count, l1_model?, seed?}` → `{seed, model, words, filter_report}` |
//! | POST | `/api/v1/study` | study request → `{id, study}` |
//! | GET | `/api/v1/study/{id}` | the stored study list |
//! | POST | `/api/v1/trials` | `{session, records}` → `{session, accepted, total}` |
//! | GET | `/api/v1/analysis/{session}` | accuracy, reaction-time cells, normalized averages |
//! | GET | `/api/v1/models` | `[{id, order, alphabet, path}]` |
//!
//! Errors are `{"error": message, "field"?: name}` with status 400, 404,
//! 409 or 503.

pub mod api;
pub mod config;
mod error;
pub mod pipeline;
pub mod store;

pub use api::router;
pub use config::Config;
pub use error::{ApiError, ServiceError};
pub use pipeline::AppState;
pub use store::{FileStore, MemoryStore, SessionStore};
