//! Single-server PIR over a `D0 × D1` grid of plaintext records.
//!
//! A query is one packed ciphertext. The server expands it into a one-hot
//! row vector plus gadget-scaled column bits, multiplies the row vector into
//! the encoded database, and folds the resulting `D1` column ciphertexts
//! down to one with a tournament of external products.

mod client;
mod coltor;
mod config;
mod database;
mod expand;
mod rowsel;
mod server;

pub use client::{
    client_decode_response, client_gen_query, client_gen_reference_rgsws, query_phase, ClientKeys, ClientQuery,
    PublicKeys, Response,
};
pub use coltor::{build_rgsw_from_expanded, col_tournament, tournament_node};
pub use config::{DbConfig, DEFAULT_D0, DEFAULT_RECORD_BYTES};
pub use database::{encode_database, pack_bytes, plaintext_poly, unpack_bytes, EncodedDatabase};
pub use expand::{emits_odd, expand_batch, expand_query, scatter_stage, stage_width, ExpandedQuery, StageKeys};
pub use rowsel::{query_tensor, row_select, rowsel_tensor, split_output, RowSelEngine};
pub use server::{
    expand_items, respond, respond_batch, rowsel_batch, selector_rgsws, BatchItem, RespondStats, RgswSource,
    ServeOptions,
};
