use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use super::ledger::{CommLedger, Strategy, ROUTING_LEN};
use super::shard::{shard_database, ShardSpec};
use crate::error::{invalid_arg, invalid_state, Error, Result};
use crate::he::{BfvCiphertext, HeParams, RgswCiphertext};
use crate::protocol::{
    expand_items, respond_batch, rowsel_batch, selector_rgsws, BatchItem, DbConfig, EncodedDatabase, ExpandedQuery,
    Response, RgswSource, ServeOptions,
};
use crate::planner::tournament_batch_with;
use crate::service::wire;

/// One inter-worker message: a framed ciphertext tagged with its query and
/// slot, or a notice that the sender failed.
enum Msg {
    Ct { query: u32, slot: u32, frame: Vec<u8> },
    Abort(String),
}

#[derive(Clone, Copy)]
enum Channel {
    RowCt,
    ColCt,
    Partial,
}

/// Bytes one worker put on the wire.
#[derive(Default)]
struct Sent {
    after_expand: u64,
    selector: u64,
    after_coltor: u64,
    framing: u64,
    messages: u64,
}

impl Sent {
    fn record(&mut self, channel: Channel, ct: &BfvCiphertext, frame_len: usize) {
        let data = ct.byte_len() as u64;
        match channel {
            Channel::RowCt => self.after_expand += data,
            Channel::ColCt => self.selector += data,
            Channel::Partial => self.after_coltor += data,
        }
        self.framing += (frame_len + ROUTING_LEN) as u64 - data;
        self.messages += 1;
    }

    fn add_to(&self, l: &mut CommLedger) {
        l.after_expand_bytes += self.after_expand;
        l.selector_bytes += self.selector;
        l.after_coltor_bytes += self.after_coltor;
        l.framing_bytes += self.framing;
        l.messages += self.messages;
    }
}

fn send(tx: &Sender<Msg>, msg: Msg) -> Result<()> {
    tx.send(msg).map_err(|_| Error::InvalidState("peer hung up".into()))
}

/// Sends `ct` once to every listed peer, counting it once.
fn broadcast(peers: &[&Sender<Msg>], query: usize, slot: usize, ct: &BfvCiphertext, ch: Channel, sent: &mut Sent) -> Result<()> {
    let frame = wire::encode(ct);
    sent.record(ch, ct, frame.len());
    for tx in peers {
        send(
            tx,
            Msg::Ct {
                query: query as u32,
                slot: slot as u32,
                frame: frame.clone(),
            },
        )?;
    }
    Ok(())
}

fn recv(rx: &Receiver<Msg>) -> Result<(usize, usize, Vec<u8>)> {
    match rx.recv() {
        Ok(Msg::Ct { query, slot, frame }) => Ok((query as usize, slot as usize, frame)),
        Ok(Msg::Abort(reason)) => invalid_state(format!("peer failed: {reason}")),
        Err(_) => invalid_state("all peers hung up"),
    }
}

/// Query indices a worker owns when work is split round-robin.
fn owned(batch: usize, n: usize, w: usize) -> Vec<usize> {
    (w..batch).step_by(n).collect()
}

struct WorkerCtx<'a> {
    w: usize,
    n: usize,
    strategy: Strategy,
    items: &'a [BatchItem<'a>],
    shard: &'a EncodedDatabase,
    config: &'a DbConfig,
    params: &'a HeParams,
    options: &'a ServeOptions,
    local_bits: usize,
}

/// All-gather: expand the owned queries, broadcast them, and collect
/// everyone else's until every query is complete.
fn gather_expanded(
    ctx: &WorkerCtx<'_>,
    inbox: &Receiver<Msg>,
    peers: &[&Sender<Msg>],
    sent: &mut Sent,
) -> Result<Vec<ExpandedQuery>> {
    let batch = ctx.items.len();
    let d0 = ctx.config.d0;
    let onion = ctx.options.rgsw == RgswSource::Onion;
    let cols = if onion {
        ctx.config.col_bits() * ctx.params.gadget().ell()
    } else {
        0
    };
    let mine = owned(batch, ctx.n, ctx.w);
    let my_items: Vec<_> = mine.iter().map(|&q| ctx.items[q]).collect();
    let mut scratch = Vec::new();
    let my_expanded = expand_items(&my_items, ctx.config, ctx.params, &ctx.options.policy, &mut scratch)?;

    let mut slots: Vec<Vec<Option<BfvCiphertext>>> = vec![vec![None; d0 + cols]; batch];
    for (&q, ex) in mine.iter().zip(my_expanded) {
        for (s, ct) in ex.row_cts.iter().enumerate() {
            broadcast(peers, q, s, ct, Channel::RowCt, sent)?;
        }
        if onion {
            for (s, ct) in ex.col_cts.iter().enumerate() {
                broadcast(peers, q, d0 + s, ct, Channel::ColCt, sent)?;
            }
        }
        for (s, ct) in ex.row_cts.into_iter().chain(ex.col_cts.into_iter().take(cols)).enumerate() {
            slots[q][s] = Some(ct);
        }
    }
    let expected = (batch - mine.len()) * (d0 + cols);
    for _ in 0..expected {
        let (q, s, frame) = recv(inbox)?;
        if q >= batch || s >= d0 + cols {
            return invalid_state(format!("gathered slot ({q}, {s}) out of range"));
        }
        slots[q][s] = Some(wire::decode(&frame, ctx.params.basis())?);
    }
    slots
        .into_iter()
        .map(|s| {
            let cts = s
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::InvalidState("all-gather left a slot empty".into()))?;
            ExpandedQuery::from_flat(cts, ctx.config)
        })
        .collect()
}

/// One sharded worker: expansion (local or gathered), RowSel on its slice,
/// the in-shard tournament stages, then one partial per query to the
/// coordinator. Returns the selector RGSWs it used and its sent bytes.
fn shard_worker(
    ctx: &WorkerCtx<'_>,
    inbox: &Receiver<Msg>,
    peers: &[&Sender<Msg>],
    coord: &Sender<Msg>,
) -> Result<(Vec<Vec<RgswCiphertext>>, Sent)> {
    let mut sent = Sent::default();
    let mut scratch = Vec::new();
    let expanded = match ctx.strategy {
        Strategy::ShardAllGather => gather_expanded(ctx, inbox, peers, &mut sent)?,
        _ => expand_items(ctx.items, ctx.config, ctx.params, &ctx.options.policy, &mut scratch)?,
    };
    let rgsws = selector_rgsws(ctx.items, &expanded, ctx.config, ctx.params, ctx.options.rgsw)?;
    let (cols, _) = rowsel_batch(&expanded, ctx.shard, &ctx.options.engine)?;
    drop(expanded);
    let low: Vec<&[RgswCiphertext]> = rgsws.iter().map(|r| &r[..ctx.local_bits]).collect();
    let partials = tournament_batch_with(cols, &low, 0, ctx.params, &ctx.options.policy, &mut scratch)?;
    for (q, ct) in partials.iter().enumerate() {
        broadcast(&[coord], q, ctx.w, ct, Channel::Partial, &mut sent)?;
    }
    Ok((rgsws, sent))
}

fn run_sharded(
    items: &[BatchItem<'_>],
    db: &EncodedDatabase,
    strategy: Strategy,
    spec: &ShardSpec,
    params: &HeParams,
    options: &ServeOptions,
    ledger: &mut CommLedger,
) -> Result<Vec<Response>> {
    if !spec.is_uniform() {
        return invalid_arg("sharded strategies need equal-width shards");
    }
    let n = spec.n_workers();
    let batch = items.len();
    let shards = shard_database(db, spec)?;
    let config = db.config();
    let (inbox_tx, inboxes): (Vec<_>, Vec<_>) = (0..n).map(|_| channel::<Msg>()).unzip();
    let (coord_tx, coord_rx) = channel::<Msg>();

    let (partials, results) = thread::scope(|scope| {
        let handles: Vec<_> = inboxes
            .into_iter()
            .enumerate()
            .map(|(w, inbox)| {
                let peer_tx: Vec<Sender<Msg>> = inbox_tx
                    .iter()
                    .enumerate()
                    .filter(|&(p, _)| p != w)
                    .map(|(_, tx)| tx.clone())
                    .collect();
                let coord = coord_tx.clone();
                let ctx = WorkerCtx {
                    w,
                    n,
                    strategy,
                    items,
                    shard: &shards[w],
                    config,
                    params,
                    options,
                    local_bits: spec.local_bits(),
                };
                scope.spawn(move || {
                    let peers: Vec<&Sender<Msg>> = peer_tx.iter().collect();
                    let out = shard_worker(&ctx, &inbox, &peers, &coord);
                    if let Err(e) = &out {
                        for tx in peers.iter().copied().chain([&coord]) {
                            let _ = tx.send(Msg::Abort(format!("worker {w}: {e}")));
                        }
                    }
                    out
                })
            })
            .collect();
        drop(coord_tx);
        drop(inbox_tx);

        let mut partials: Vec<Vec<Option<BfvCiphertext>>> = vec![vec![None; n]; batch];
        let collected = (0..batch * n).try_for_each(|_| {
            let (q, w, frame) = recv(&coord_rx)?;
            if q >= batch || w >= n {
                return invalid_state(format!("partial ({q}, {w}) out of range"));
            }
            partials[q][w] = Some(wire::decode(&frame, params.basis())?);
            Ok(())
        });
        let results: Vec<_> = handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| invalid_state("worker panicked")))
            .collect();
        (collected.map(|_| partials), results)
    });

    let mut rgsws = None;
    for (w, r) in results.into_iter().enumerate() {
        let (rg, sent) = r?;
        sent.add_to(ledger);
        if w == 0 {
            rgsws = Some(rg);
        }
    }
    let partials = partials?;
    // the coordinator shares worker 0's memory, so its RGSWs need no transfer
    let rgsws = rgsws.expect("worker 0 result");
    let cts = partials
        .into_iter()
        .map(|p| p.into_iter().collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InvalidState("missing partial result".into()))?;
    let high: Vec<&[RgswCiphertext]> = rgsws.iter().map(|r| &r[spec.local_bits()..]).collect();
    let mut scratch = Vec::new();
    let out = tournament_batch_with(cts, &high, spec.local_bits(), params, &options.policy, &mut scratch)?;
    Ok(out.into_iter().map(|ct| Response { ct }).collect())
}

fn run_naive(
    items: &[BatchItem<'_>],
    db: &EncodedDatabase,
    n: usize,
    params: &HeParams,
    options: &ServeOptions,
) -> Result<Vec<Response>> {
    let batch = items.len();
    let parts = thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|w| {
                scope.spawn(move || {
                    let mine = owned(batch, n, w);
                    let sub: Vec<_> = mine.iter().map(|&q| items[q]).collect();
                    respond_batch(&sub, db, params, options).map(|(r, _)| (mine, r))
                })
            })
            .collect::<Vec<_>>();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| invalid_state("worker panicked")))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out: Vec<Option<Response>> = vec![None; batch];
    for (mine, rs) in parts {
        for (q, r) in mine.into_iter().zip(rs) {
            out[q] = Some(r);
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every query answered")).collect())
}

/// Answers a batch with `spec.n_workers()` in-process workers that talk only
/// through framed messages. Responses equal single-worker execution.
pub fn run_strategy(
    items: &[BatchItem<'_>],
    db: &EncodedDatabase,
    strategy: Strategy,
    spec: &ShardSpec,
    params: &HeParams,
    options: &ServeOptions,
    link_bw: f64,
) -> Result<(Vec<Response>, CommLedger)> {
    let n = spec.n_workers();
    if spec.d1() != db.config().d1 {
        return invalid_arg(format!("spec covers D1 = {} but the database has D1 = {}", spec.d1(), db.config().d1));
    }
    let mut ledger = CommLedger::empty(strategy, n, link_bw);
    if items.is_empty() {
        return Ok((Vec::new(), ledger));
    }
    let responses = match (strategy, n) {
        (_, 1) => respond_batch(items, db, params, options)?.0,
        (Strategy::NaiveBatch, _) => run_naive(items, db, n, params, options)?,
        _ => run_sharded(items, db, strategy, spec, params, options, &mut ledger)?,
    };
    Ok((responses, ledger))
}
