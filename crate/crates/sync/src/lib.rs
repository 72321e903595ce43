//! Multi-coder sync service: durable per-project event logs, an HTTP API,
//! a WebSocket event stream and server-side assist calls.

pub mod api;
pub mod config;
pub mod frames;
pub mod project;
pub mod service;
pub mod sessions;
pub mod storage;
pub mod ws;

pub use config::{Config, ConfigError, Overrides};
pub use service::{export_project, import_project, read_project, Service, ServiceError};
