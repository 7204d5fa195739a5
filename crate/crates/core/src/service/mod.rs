//! Wire format, database container, configuration, batching server,
//! client, and benchmark reports.

mod bench;
mod client;
mod config;
mod dbfile;
mod server;
pub mod wire;

pub use bench::{run_bench, BenchReport, BenchStageRow};
pub use client::{fetch_params, load_keys, save_keys, PirClient};
pub use config::{EngineKind, PolicyKind, ServerConfig};
pub use dbfile::{load_db, read_db, save_db, write_db, DbHeader, DB_MAGIC, DB_VERSION};
pub use server::{serve, start, ServerHandle};
