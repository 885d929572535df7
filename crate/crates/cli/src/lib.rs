//! Command line and HTTP front ends for the timeline pipeline.

pub mod commands;
pub mod engine;
pub mod server;

pub use commands::{run, Cli};
pub use engine::{Engine, Source, TimelineSource};
pub use server::{router, AppState, ServiceConfig};
