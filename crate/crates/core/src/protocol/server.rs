use std::time::Instant;

use super::client::{ClientQuery, PublicKeys, Response};
use super::coltor::build_rgsw_from_expanded;
use super::config::DbConfig;
use super::database::EncodedDatabase;
use super::expand::ExpandedQuery;
use super::rowsel::{query_tensor, rowsel_tensor, split_output, RowSelEngine};
use crate::error::{invalid_arg, Result};
use crate::he::{BfvCiphertext, HeParams, RgswCiphertext};
use crate::layout::PipelineTrace;
use crate::planner::{expand_batch_with, tournament_batch_with, ExecPolicy, StageStats};

/// Where the ColTor selector ciphertexts come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RgswSource {
    /// Built on the server from expanded column ciphertexts.
    #[default]
    Onion,
    /// Supplied by the client alongside the query.
    Reference,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServeOptions {
    pub engine: RowSelEngine,
    pub policy: ExecPolicy,
    pub rgsw: RgswSource,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            engine: RowSelEngine::default(),
            policy: ExecPolicy::AllStageLevel,
            rgsw: RgswSource::Onion,
        }
    }
}

/// One query of a batch together with its session material.
#[derive(Clone, Copy, Debug)]
pub struct BatchItem<'a> {
    pub query: &'a ClientQuery,
    pub keys: &'a PublicKeys,
    /// Required in reference mode, ignored otherwise.
    pub rgsws: Option<&'a [RgswCiphertext]>,
}

/// Timing and per-stage measurements of one batch.
#[derive(Clone, Debug, Default)]
pub struct RespondStats {
    pub stages: Vec<StageStats>,
    pub expand_ns: u64,
    pub rgsw_ns: u64,
    pub rowsel_ns: u64,
    pub coltor_ns: u64,
    pub trace: Option<PipelineTrace>,
}

impl RespondStats {
    pub fn total_ns(&self) -> u64 {
        self.expand_ns + self.rgsw_ns + self.rowsel_ns + self.coltor_ns
    }
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// Expands every query of a batch.
pub fn expand_items(
    items: &[BatchItem<'_>],
    config: &DbConfig,
    params: &HeParams,
    policy: &ExecPolicy,
    stages: &mut Vec<StageStats>,
) -> Result<Vec<ExpandedQuery>> {
    let pairs: Vec<_> = items.iter().map(|it| (it.query, it.keys)).collect();
    expand_batch_with(&pairs, config, params, policy, stages)
}

/// Selector RGSW ciphertexts for every query, LSB first.
pub fn selector_rgsws(
    items: &[BatchItem<'_>],
    expanded: &[ExpandedQuery],
    config: &DbConfig,
    params: &HeParams,
    source: RgswSource,
) -> Result<Vec<Vec<RgswCiphertext>>> {
    items
        .iter()
        .zip(expanded)
        .map(|(it, ex)| match source {
            RgswSource::Onion => build_rgsw_from_expanded(&ex.col_cts, &it.keys.conversion, params),
            RgswSource::Reference => match it.rgsws {
                Some(r) if r.len() == config.col_bits() => Ok(r.to_vec()),
                Some(r) => invalid_arg(format!("expected {} RGSW ciphertexts, got {}", config.col_bits(), r.len())),
                None => invalid_arg("reference mode needs client RGSW ciphertexts"),
            },
        })
        .collect()
}

/// RowSel over a (possibly column-sliced) database, one ciphertext list per query.
pub fn rowsel_batch(
    expanded: &[ExpandedQuery],
    db: &EncodedDatabase,
    engine: &RowSelEngine,
) -> Result<(Vec<Vec<BfvCiphertext>>, Option<PipelineTrace>)> {
    let rows: Vec<&[BfvCiphertext]> = expanded.iter().map(|e| e.row_cts.as_slice()).collect();
    let a = query_tensor(&rows, db.basis())?;
    let (out, trace) = rowsel_tensor(&a, db, engine)?;
    Ok((split_output(&out, db.basis())?, trace))
}

/// Answers a batch end to end: expansion, RowSel, ColTor.
pub fn respond_batch(
    items: &[BatchItem<'_>],
    db: &EncodedDatabase,
    params: &HeParams,
    options: &ServeOptions,
) -> Result<(Vec<Response>, RespondStats)> {
    if items.is_empty() {
        return Ok((Vec::new(), RespondStats::default()));
    }
    let config = db.config();
    let mut stats = RespondStats::default();

    let t = Instant::now();
    let expanded = expand_items(items, config, params, &options.policy, &mut stats.stages)?;
    stats.expand_ns = elapsed_ns(t);

    let t = Instant::now();
    let rgsws = selector_rgsws(items, &expanded, config, params, options.rgsw)?;
    stats.rgsw_ns = elapsed_ns(t);

    let t = Instant::now();
    let (cols, trace) = rowsel_batch(&expanded, db, &options.engine)?;
    stats.rowsel_ns = elapsed_ns(t);
    stats.trace = trace;

    let t = Instant::now();
    let refs: Vec<&[RgswCiphertext]> = rgsws.iter().map(|r| r.as_slice()).collect();
    let cts = tournament_batch_with(cols, &refs, 0, params, &options.policy, &mut stats.stages)?;
    stats.coltor_ns = elapsed_ns(t);

    Ok((cts.into_iter().map(|ct| Response { ct }).collect(), stats))
}

/// Single-query convenience wrapper.
pub fn respond(
    item: BatchItem<'_>,
    db: &EncodedDatabase,
    params: &HeParams,
    options: &ServeOptions,
) -> Result<Response> {
    let (mut r, _) = respond_batch(&[item], db, params, options)?;
    Ok(r.pop().expect("one response per query"))
}
