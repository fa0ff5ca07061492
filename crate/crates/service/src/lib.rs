//! Session service: load, analyze, infill, keep or revert, export.
//!
//! [`SessionService`] holds the sessions and implements each operation;
//! [`router::handle`] maps JSON requests onto it and [`HttpServer`] puts it
//! on the network. The endpoints are described in `docs/protocol.md`.

pub mod config;
pub mod http;
pub mod messages;
pub mod router;
pub mod session;

pub use config::{ConfigError, GeneratorConfig, RemoteConfig, ServiceConfig};
pub use http::{HttpServer, HttpTransport, ServeError};
pub use router::handle;
pub use session::SessionService;
