//! Multi-worker execution over column shards of the database.
//!
//! Workers are threads that exchange only framed ciphertexts over channels.
//! Sharded strategies resolve the low column bits inside each shard and
//! leave the top `log2(n_workers)` tournament stages to a coordinator that
//! runs beside worker 0.

mod ledger;
mod run;
mod shard;

pub use ledger::{comm_bytes, CommLedger, Strategy, FRAME_OVERHEAD, NVLINK4_BW, PCIE5_BW, ROUTING_LEN};
pub use run::run_strategy;
pub use shard::{reassemble, shard_database, ShardSpec};
