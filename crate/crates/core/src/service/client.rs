use std::fs;
use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::Arc;

use rand::RngCore;

use super::wire::{self, EvkSet, MessageKind, ParamsInfo, MAX_PAYLOAD};
use crate::error::{Error, Result};
use crate::he::{HeParams, SecretKey};
use crate::protocol::{client_decode_response, client_gen_query, ClientKeys, ClientQuery, DbConfig, Response};
use crate::ring::{Domain, RnsBasis, RnsPoly};

/// A connected PIR client with session keys already uploaded.
pub struct PirClient {
    stream: TcpStream,
    info: ParamsInfo,
    params: HeParams,
    keys: ClientKeys,
    client_id: u64,
}

fn exchange(stream: &mut TcpStream, frame: &[u8]) -> Result<Vec<u8>> {
    wire::write_frame(stream, frame)?;
    let reply = wire::read_frame(stream, MAX_PAYLOAD)?;
    if wire::peek_kind(&reply)? == MessageKind::Error {
        return Err(Error::InvalidState(format!("server error: {}", wire::decode_error(&reply)?)));
    }
    Ok(reply)
}

/// Connects and asks the server for its parameters.
pub fn fetch_params(addr: impl ToSocketAddrs) -> Result<(TcpStream, ParamsInfo)> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let reply = exchange(&mut stream, &wire::frame(MessageKind::Params, &[]))?;
    Ok((stream, ParamsInfo::decode(&reply)?))
}

impl PirClient {
    /// Connects, generates fresh keys, and uploads the public half.
    pub fn connect<R: RngCore + ?Sized>(addr: impl ToSocketAddrs, client_id: u64, rng: &mut R) -> Result<Self> {
        Self::connect_with(addr, client_id, |params, config| ClientKeys::generate(params, config, rng))
    }

    /// Connects with keys produced by `make_keys` from the served parameters.
    pub fn connect_with(
        addr: impl ToSocketAddrs,
        client_id: u64,
        make_keys: impl FnOnce(&HeParams, &DbConfig) -> Result<ClientKeys>,
    ) -> Result<Self> {
        let (mut stream, info) = fetch_params(addr)?;
        let params = info.to_params()?;
        let keys = make_keys(&params, &info.config)?;
        let set = EvkSet {
            client_id,
            keys: keys.public.clone(),
        };
        wire::write_frame(&mut stream, &wire::encode(&set))?;
        Ok(PirClient {
            stream,
            info,
            params,
            keys,
            client_id,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn config(&self) -> &DbConfig {
        &self.info.config
    }

    pub fn keys(&self) -> &ClientKeys {
        &self.keys
    }

    pub fn client_id(&self) -> u64 {
        self.client_id
    }

    pub fn build_query<R: RngCore + ?Sized>(&self, row: usize, col: usize, rng: &mut R) -> Result<ClientQuery> {
        client_gen_query(&self.keys.sk, self.client_id, row, col, &self.info.config, &self.params, rng)
    }

    /// Sends a prepared query and returns the raw response frame.
    pub fn send_raw(&mut self, query: &ClientQuery) -> Result<Vec<u8>> {
        exchange(&mut self.stream, &wire::encode(query))
    }

    pub fn send(&mut self, query: &ClientQuery) -> Result<Response> {
        let bytes = self.send_raw(query)?;
        wire::decode(&bytes, self.params.basis())
    }

    pub fn decode(&self, response: &Response) -> Result<Vec<u8>> {
        client_decode_response(&self.keys.sk, response, &self.info.config, &self.params)
    }

    /// Fetches record `index` of the row-major grid.
    pub fn query_index<R: RngCore + ?Sized>(&mut self, index: usize, rng: &mut R) -> Result<Vec<u8>> {
        let (row, col) = self.info.config.locate(index)?;
        let q = self.build_query(row, col, rng)?;
        let r = self.send(&q)?;
        self.decode(&r)
    }

    /// Sends raw bytes and returns whatever single frame comes back.
    pub fn send_bytes(&mut self, bytes: &[u8]) -> Result<Vec<u8>> {
        self.stream.write_all(bytes)?;
        self.stream.flush()?;
        wire::read_frame(&mut self.stream, MAX_PAYLOAD)
    }
}

/// Key file: the secret key as a polynomial frame followed by the public
/// keys as an evaluation-key-set frame.
pub fn save_keys(path: &Path, keys: &ClientKeys) -> Result<()> {
    let mut out = wire::encode(keys.sk.ntt());
    out.extend_from_slice(&wire::encode(&EvkSet {
        client_id: 0,
        keys: keys.public.clone(),
    }));
    fs::write(path, out)?;
    Ok(())
}

pub fn load_keys(path: &Path, basis: &Arc<RnsBasis>) -> Result<ClientKeys> {
    let bytes = fs::read(path)?;
    let first = wire::WireHeader::decode(&bytes)?;
    let split = wire::HEADER_LEN + first.len as usize;
    if bytes.len() < split {
        return Err(Error::Parse {
            offset: bytes.len(),
            msg: "truncated key file".into(),
        });
    }
    let s: RnsPoly = wire::decode(&bytes[..split], basis)?;
    if s.domain() != Domain::Ntt {
        return Err(Error::Parse {
            offset: wire::HEADER_LEN + 5,
            msg: "secret key must be in the NTT domain".into(),
        });
    }
    let set: EvkSet = wire::decode(&bytes[split..], basis).map_err(|e| match e {
        Error::Parse { offset, msg } => Error::Parse {
            offset: offset + split,
            msg,
        },
        other => other,
    })?;
    Ok(ClientKeys {
        sk: SecretKey::from_ntt(s)?,
        public: set.keys,
    })
}
