//! Batched single-server lattice PIR.
//!
//! The engine answers queries in three phases: a binary-tree
//! query expansion, a row selection that reduces to `k·N` independent modular
//! GEMMs, and a column tournament built from external products. Around those
//! phases sit the systems pieces: a working-set planner that picks fused or
//! per-operation execution per tree stage, two GEMM layouts with a pipelined
//! transposition path, multi-worker sharding with byte-exact communication
//! ledgers, and a length-prefixed wire protocol with a batching server.
//!
//! Module map:
//!
//! - [`ring`]: RNS polynomials, negacyclic NTT, CRT reconstruction, sampling.
//! - [`he`]: BFV/RGSW keys, encryption, digit decomposition, `Subs`, external product.
//! - [`protocol`]: database encoding, query generation, expansion, RowSel, ColTor.
//! - [`layout`]: tensor layouts, tiled GEMM engines, transpose/GEMM pipeline.
//! - [`planner`]: working sets, mode selection, roofline model, execution paths.
//! - [`cluster`]: sharding strategies and communication ledgers.
//! - [`service`]: wire format, DB container, config, server, client, bench.

pub mod cluster;
pub mod error;
pub mod he;
pub mod layout;
pub mod planner;
pub mod protocol;
pub mod ring;
pub mod service;

pub use error::{Error, Result};
