use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use log::{debug, info, warn};

use super::config::ServerConfig;
use super::dbfile::load_db;
use super::wire::{self, EvkSet, MessageKind, ParamsInfo, WireHeader, HEADER_LEN, MAX_PAYLOAD};
use crate::cluster::run_strategy;
use crate::error::{Error, Result};
use crate::he::HeParams;
use crate::layout::Layout;
use crate::protocol::{respond_batch, BatchItem, ClientQuery, EncodedDatabase, PublicKeys, Response};

struct Job {
    query: ClientQuery,
    reply: Sender<Vec<u8>>,
}

struct Shared {
    db: EncodedDatabase,
    params: HeParams,
    config: ServerConfig,
    params_frame: Vec<u8>,
    keys: Mutex<HashMap<u64, Arc<PublicKeys>>>,
    batches: Mutex<Vec<usize>>,
    shutdown: AtomicBool,
}

/// A running server. Dropping the handle leaves it running; call
/// [`ServerHandle::shutdown`] to stop accepting connections.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Sizes of every batch run so far, in order.
    pub fn batch_sizes(&self) -> Vec<usize> {
        self.shared.batches.lock().expect("batch log").clone()
    }

    pub fn shutdown(mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the accept loop exits.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Binds `config.listen` and serves `db` until shut down.
pub fn start(db: EncodedDatabase, params: HeParams, config: ServerConfig) -> Result<ServerHandle> {
    config.validate()?;
    if db.basis().primes() != params.basis().primes() {
        return Err(Error::InvalidConfig("database ring does not match the configured parameters".into()));
    }
    db.config().validate_for(&params)?;
    config.shard_spec(db.config().d1)?;
    let listener = TcpListener::bind(&config.listen)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        params_frame: ParamsInfo::from_params(&params, db.config()).encode(),
        db,
        params,
        config,
        keys: Mutex::new(HashMap::new()),
        batches: Mutex::new(Vec::new()),
        shutdown: AtomicBool::new(false),
    });
    let (job_tx, job_rx) = channel::<Job>();
    {
        let shared = shared.clone();
        thread::spawn(move || collector(&shared, job_rx));
    }
    let accept = {
        let shared = shared.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                if shared.shutdown.load(Ordering::SeqCst) {
                    break;
                }
                match stream {
                    Ok(s) => {
                        let shared = shared.clone();
                        let jobs = job_tx.clone();
                        thread::spawn(move || {
                            if let Err(e) = connection(&shared, s, &jobs) {
                                debug!("connection closed: {e}");
                            }
                        });
                    }
                    Err(e) => warn!("accept failed: {e}"),
                }
            }
        })
    };
    info!("listening on {addr}");
    Ok(ServerHandle {
        addr,
        shared,
        accept: Some(accept),
    })
}

/// Loads the configured database and serves it forever.
pub fn serve(config: ServerConfig) -> Result<()> {
    let path = config
        .db
        .clone()
        .ok_or_else(|| Error::InvalidConfig("serve needs a db path".into()))?;
    let params = config.he_params()?;
    let (db, header) = load_db(&path, Layout::Transposed)?;
    header.check_params(&params)?;
    start(db, params, config)?.wait();
    Ok(())
}

fn connection(shared: &Shared, mut stream: TcpStream, jobs: &Sender<Job>) -> Result<()> {
    stream.set_nodelay(true)?;
    loop {
        let mut head = [0u8; HEADER_LEN];
        match stream.read_exact(&mut head) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        let header = match WireHeader::decode(&head) {
            Ok(h) => h,
            Err(e) => {
                // the stream cannot be resynchronized after a bad header
                let _ = wire::write_frame(&mut stream, &wire::encode_error(&e.to_string()));
                return Err(e);
            }
        };
        if header.len > MAX_PAYLOAD {
            return Err(Error::InvalidArgument(format!("payload of {} bytes refused", header.len)));
        }
        let mut frame = head.to_vec();
        frame.resize(HEADER_LEN + header.len as usize, 0);
        stream.read_exact(&mut frame[HEADER_LEN..])?;
        let reply = match handle(shared, header.kind, &frame, jobs) {
            Ok(r) => r,
            Err(e) => Some(wire::encode_error(&e.to_string())),
        };
        if let Some(bytes) = reply {
            stream.write_all(&bytes)?;
            stream.flush()?;
        }
    }
}

fn handle(shared: &Shared, kind: MessageKind, frame: &[u8], jobs: &Sender<Job>) -> Result<Option<Vec<u8>>> {
    match kind {
        MessageKind::Params => Ok(Some(shared.params_frame.clone())),
        MessageKind::EvkSet => {
            let set: EvkSet = wire::decode(frame, shared.params.basis())?;
            debug!("keys for client {}: {} bytes", set.client_id, set.keys.byte_len());
            shared.keys.lock().expect("key cache").insert(set.client_id, Arc::new(set.keys));
            Ok(None)
        }
        MessageKind::Query => {
            let query: ClientQuery = wire::decode(frame, shared.params.basis())?;
            let (tx, rx) = channel();
            jobs.send(Job { query, reply: tx })
                .map_err(|_| Error::InvalidState("batch collector stopped".into()))?;
            let bytes = rx
                .recv()
                .map_err(|_| Error::InvalidState("batch dropped the query".into()))?;
            Ok(Some(bytes))
        }
        other => Err(Error::InvalidArgument(format!("server does not accept {other:?} messages"))),
    }
}

/// Forms batches of up to `batch_size` queries, closing a batch early when
/// the wait window after its first query expires.
fn collector(shared: &Shared, rx: Receiver<Job>) {
    let window = shared.config.batch_window();
    while let Ok(first) = rx.recv() {
        let deadline = Instant::now() + window;
        let mut jobs = vec![first];
        while jobs.len() < shared.config.batch_size {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(j) => jobs.push(j),
                Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        run_jobs(shared, jobs);
    }
}

fn run_jobs(shared: &Shared, jobs: Vec<Job>) {
    let mut ready = Vec::new();
    {
        let cache = shared.keys.lock().expect("key cache");
        for job in jobs {
            match cache.get(&job.query.client_id) {
                Some(k) => ready.push((job, k.clone())),
                None => {
                    let msg = format!("no keys uploaded for client {}", job.query.client_id);
                    let _ = job.reply.send(wire::encode_error(&msg));
                }
            }
        }
    }
    if ready.is_empty() {
        return;
    }
    shared.batches.lock().expect("batch log").push(ready.len());
    let items: Vec<BatchItem<'_>> = ready
        .iter()
        .map(|(job, keys)| BatchItem {
            query: &job.query,
            keys: keys.as_ref(),
            rgsws: None,
        })
        .collect();
    let t = Instant::now();
    let result = answer(shared, &items);
    info!("batch of {} answered in {:?}", items.len(), t.elapsed());
    match result {
        Ok(responses) => {
            for ((job, _), r) in ready.iter().zip(responses) {
                let _ = job.reply.send(wire::encode(&r));
            }
        }
        Err(e) => {
            warn!("batch failed: {e}");
            for (job, _) in &ready {
                let _ = job.reply.send(wire::encode_error(&e.to_string()));
            }
        }
    }
}

fn answer(shared: &Shared, items: &[BatchItem<'_>]) -> Result<Vec<Response>> {
    let cfg = &shared.config;
    let options = cfg.serve_options(shared.db.config(), items.len(), &shared.params);
    if cfg.workers == 1 {
        return Ok(respond_batch(items, &shared.db, &shared.params, &options)?.0);
    }
    let spec = cfg.shard_spec(shared.db.config().d1)?;
    let (r, ledger) = run_strategy(items, &shared.db, cfg.strategy, &spec, &shared.params, &options, cfg.link_bw)?;
    debug!("batch communication: {} bytes", ledger.total_bytes());
    Ok(r)
}
