use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::he::{BfvCiphertext, ConversionKey, EvalKey, GadgetConfig, HeParams, RgswCiphertext};
use crate::protocol::{ClientQuery, DbConfig, PublicKeys, Response};
use crate::ring::{Domain, RnsBasis, RnsPoly};

pub const MAGIC: [u8; 4] = *b"GPIR";
pub const VERSION: u16 = 1;
/// Magic, version, kind, payload length.
pub const HEADER_LEN: usize = 4 + 2 + 1 + 8;
/// `n` (u32), limb count (u8), domain flag (u8).
pub const ECHO_LEN: usize = 6;
/// Frames above this size are refused before reading the body.
pub const MAX_PAYLOAD: u64 = 256 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Params = 0,
    Query = 1,
    EvkSet = 2,
    Response = 3,
    Error = 4,
    Poly = 5,
    Ciphertext = 6,
    Rgsw = 7,
    EvalKey = 8,
}

impl MessageKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        use MessageKind::*;
        [Params, Query, EvkSet, Response, Error, Poly, Ciphertext, Rgsw, EvalKey]
            .into_iter()
            .find(|k| *k as u8 == v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireHeader {
    pub version: u16,
    pub kind: MessageKind,
    pub len: u64,
}

impl WireHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[..4].copy_from_slice(&MAGIC);
        h[4..6].copy_from_slice(&self.version.to_le_bytes());
        h[6] = self.kind as u8;
        h[7..].copy_from_slice(&self.len.to_le_bytes());
        h
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(parse(bytes.len(), "truncated header"));
        }
        if bytes[..4] != MAGIC {
            return Err(parse(0, "bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(parse(4, format!("unsupported version {version}")));
        }
        let kind = MessageKind::from_u8(bytes[6]).ok_or_else(|| parse(6, format!("unknown kind {}", bytes[6])))?;
        let len = u64::from_le_bytes(bytes[7..HEADER_LEN].try_into().expect("8 bytes"));
        Ok(WireHeader { version, kind, len })
    }
}

fn parse(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        msg: msg.into(),
    }
}

/// Bounds-checked little-endian cursor that reports absolute offsets.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], base: usize) -> Self {
        Reader { buf, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        parse(self.offset(), msg)
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.error(format!("need {n} bytes, {} left", self.remaining())));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    pub fn u32_vec(&mut self, count: usize) -> Result<Vec<u32>> {
        let raw = self.bytes(count.checked_mul(4).ok_or_else(|| self.error("length overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.error(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

pub(crate) fn put_u32s(out: &mut Vec<u8>, words: &[u32]) {
    out.reserve(words.len() * 4);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

/// A value with a fixed message kind and a deterministic body encoding.
/// Ring-valued bodies are decoded against a caller-supplied basis.
pub trait WireValue: Sized {
    const KIND: MessageKind;
    fn encode_body(&self, out: &mut Vec<u8>);
    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self>;
}

fn put_echo(out: &mut Vec<u8>, basis: &RnsBasis, domain: Domain) {
    out.extend_from_slice(&(basis.degree() as u32).to_le_bytes());
    out.push(basis.len() as u8);
    out.push(match domain {
        Domain::Coefficient => 0,
        Domain::Ntt => 1,
    });
}

fn read_echo(r: &mut Reader<'_>, basis: &RnsBasis) -> Result<Domain> {
    let at = r.offset();
    let n = r.u32()? as usize;
    let k = r.u8()? as usize;
    if n != basis.degree() || k != basis.len() {
        return Err(parse(at, format!("parameters (n={n}, k={k}) do not match (n={}, k={})", basis.degree(), basis.len())));
    }
    match r.u8()? {
        0 => Ok(Domain::Coefficient),
        1 => Ok(Domain::Ntt),
        d => Err(parse(at + 5, format!("bad domain flag {d}"))),
    }
}

fn read_limbs(r: &mut Reader<'_>, basis: &Arc<RnsBasis>, domain: Domain) -> Result<RnsPoly> {
    let at = r.offset();
    let data = r.u32_vec(basis.len() * basis.degree())?;
    RnsPoly::from_data(basis, data, domain).map_err(|e| parse(at, e.to_string()))
}

fn read_ct_limbs(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<BfvCiphertext> {
    let a = read_limbs(r, basis, Domain::Ntt)?;
    let b = read_limbs(r, basis, Domain::Ntt)?;
    Ok(BfvCiphertext::from_parts_unchecked(a, b))
}

fn put_ct_limbs(out: &mut Vec<u8>, ct: &BfvCiphertext) {
    put_u32s(out, ct.a().data());
    put_u32s(out, ct.b().data());
}

fn read_ntt_echo(r: &mut Reader<'_>, basis: &RnsBasis) -> Result<()> {
    let at = r.offset();
    if read_echo(r, basis)? != Domain::Ntt {
        return Err(parse(at + 5, "ciphertexts must be in the NTT domain"));
    }
    Ok(())
}

fn put_rows(out: &mut Vec<u8>, rows: &[BfvCiphertext]) {
    out.push(rows.len() as u8);
    for row in rows {
        put_ct_limbs(out, row);
    }
}

fn read_rows(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Vec<BfvCiphertext>> {
    let count = r.u8()? as usize;
    (0..count).map(|_| read_ct_limbs(r, basis)).collect()
}

impl WireValue for RnsPoly {
    const KIND: MessageKind = MessageKind::Poly;

    fn encode_body(&self, out: &mut Vec<u8>) {
        put_echo(out, self.basis(), self.domain());
        put_u32s(out, self.data());
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        let domain = read_echo(r, basis)?;
        read_limbs(r, basis, domain)
    }
}

impl WireValue for BfvCiphertext {
    const KIND: MessageKind = MessageKind::Ciphertext;

    fn encode_body(&self, out: &mut Vec<u8>) {
        put_echo(out, self.a().basis(), Domain::Ntt);
        put_ct_limbs(out, self);
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        read_ntt_echo(r, basis)?;
        read_ct_limbs(r, basis)
    }
}

impl WireValue for RgswCiphertext {
    const KIND: MessageKind = MessageKind::Rgsw;

    fn encode_body(&self, out: &mut Vec<u8>) {
        put_echo(out, self.rows()[0].a().basis(), Domain::Ntt);
        put_rows(out, self.rows());
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        read_ntt_echo(r, basis)?;
        let at = r.offset();
        let rows = read_rows(r, basis)?;
        RgswCiphertext::from_rows(rows).map_err(|e| parse(at, e.to_string()))
    }
}

impl WireValue for EvalKey {
    const KIND: MessageKind = MessageKind::EvalKey;

    fn encode_body(&self, out: &mut Vec<u8>) {
        put_echo(out, self.rows()[0].a().basis(), Domain::Ntt);
        out.extend_from_slice(&(self.index() as u32).to_le_bytes());
        put_rows(out, self.rows());
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        read_ntt_echo(r, basis)?;
        let at = r.offset();
        let k = r.u32()? as usize;
        let rows = read_rows(r, basis)?;
        EvalKey::from_rows(k, rows).map_err(|e| parse(at, e.to_string()))
    }
}

impl WireValue for ClientQuery {
    const KIND: MessageKind = MessageKind::Query;

    fn encode_body(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.client_id.to_le_bytes());
        self.ct.encode_body(out);
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        let client_id = r.u64()?;
        let ct = BfvCiphertext::decode_body(r, basis)?;
        Ok(ClientQuery { client_id, ct })
    }
}

impl WireValue for Response {
    const KIND: MessageKind = MessageKind::Response;

    fn encode_body(&self, out: &mut Vec<u8>) {
        self.ct.encode_body(out);
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        Ok(Response {
            ct: BfvCiphertext::decode_body(r, basis)?,
        })
    }
}

/// A client's session keys, tagged with its id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvkSet {
    pub client_id: u64,
    pub keys: PublicKeys,
}

impl WireValue for EvkSet {
    const KIND: MessageKind = MessageKind::EvkSet;

    fn encode_body(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.client_id.to_le_bytes());
        let basis = self.keys.conversion.rows()[0].a().basis();
        put_echo(out, basis, Domain::Ntt);
        out.push(self.keys.evks.len() as u8);
        for evk in &self.keys.evks {
            out.extend_from_slice(&(evk.index() as u32).to_le_bytes());
            put_rows(out, evk.rows());
        }
        put_rows(out, self.keys.conversion.rows());
    }

    fn decode_body(r: &mut Reader<'_>, basis: &Arc<RnsBasis>) -> Result<Self> {
        let client_id = r.u64()?;
        read_ntt_echo(r, basis)?;
        let count = r.u8()? as usize;
        let mut evks = Vec::with_capacity(count);
        for _ in 0..count {
            let at = r.offset();
            let k = r.u32()? as usize;
            let rows = read_rows(r, basis)?;
            evks.push(EvalKey::from_rows(k, rows).map_err(|e| parse(at, e.to_string()))?);
        }
        let at = r.offset();
        let conversion = ConversionKey::from_rows(read_rows(r, basis)?).map_err(|e| parse(at, e.to_string()))?;
        Ok(EvkSet {
            client_id,
            keys: PublicKeys { evks, conversion },
        })
    }
}

/// Everything a client needs to build queries against a served database.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamsInfo {
    pub primes: Vec<u32>,
    pub degree: usize,
    pub plain_bits: u32,
    pub gadget_bits: u32,
    pub ell: usize,
    pub error_bound: u32,
    pub config: DbConfig,
}

impl ParamsInfo {
    pub fn from_params(params: &HeParams, config: &DbConfig) -> Self {
        ParamsInfo {
            primes: params.basis().primes(),
            degree: params.degree(),
            plain_bits: params.plain_bits(),
            gadget_bits: params.gadget().base_bits(),
            ell: params.gadget().ell(),
            error_bound: params.error_bound(),
            config: *config,
        }
    }

    pub fn to_params(&self) -> Result<HeParams> {
        let basis = Arc::new(RnsBasis::new(self.degree, &self.primes)?);
        HeParams::new(basis, self.plain_bits, GadgetConfig::new(self.gadget_bits, self.ell)?, self.error_bound)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        body.extend_from_slice(&(self.degree as u32).to_le_bytes());
        body.push(self.primes.len() as u8);
        put_u32s(&mut body, &self.primes);
        body.extend_from_slice(&self.plain_bits.to_le_bytes());
        body.extend_from_slice(&self.gadget_bits.to_le_bytes());
        body.push(self.ell as u8);
        body.extend_from_slice(&self.error_bound.to_le_bytes());
        for v in [self.config.d0, self.config.d1, self.config.record_bytes] {
            body.extend_from_slice(&(v as u64).to_le_bytes());
        }
        frame(MessageKind::Params, &body)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = open_frame(bytes, MessageKind::Params)?;
        let degree = r.u32()? as usize;
        let k = r.u8()? as usize;
        let primes = r.u32_vec(k)?;
        let plain_bits = r.u32()?;
        let gadget_bits = r.u32()?;
        let ell = r.u8()? as usize;
        let error_bound = r.u32()?;
        let at = r.offset();
        let (d0, d1, rb) = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
        let config = DbConfig::new(d0, d1, rb).map_err(|e| parse(at, e.to_string()))?;
        r.finish()?;
        Ok(ParamsInfo {
            primes,
            degree,
            plain_bits,
            gadget_bits,
            ell,
            error_bound,
            config,
        })
    }
}

/// Header plus body.
pub fn frame(kind: MessageKind, body: &[u8]) -> Vec<u8> {
    let header = WireHeader {
        version: VERSION,
        kind,
        len: body.len() as u64,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&header.encode());
    out.extend_from_slice(body);
    out
}

/// Validates the header of a complete frame and returns a reader over its body.
pub fn open_frame(bytes: &[u8], kind: MessageKind) -> Result<Reader<'_>> {
    let h = WireHeader::decode(bytes)?;
    if h.kind != kind {
        return Err(parse(6, format!("expected {kind:?}, found {:?}", h.kind)));
    }
    let body = &bytes[HEADER_LEN..];
    if h.len != body.len() as u64 {
        return Err(parse(7, format!("length field {} but {} body bytes", h.len, body.len())));
    }
    Ok(Reader::new(body, HEADER_LEN))
}

pub fn encode<T: WireValue>(value: &T) -> Vec<u8> {
    let mut body = Vec::new();
    value.encode_body(&mut body);
    frame(T::KIND, &body)
}

pub fn decode<T: WireValue>(bytes: &[u8], basis: &Arc<RnsBasis>) -> Result<T> {
    let mut r = open_frame(bytes, T::KIND)?;
    let v = T::decode_body(&mut r, basis)?;
    r.finish()?;
    Ok(v)
}

/// An error message frame.
pub fn encode_error(msg: &str) -> Vec<u8> {
    frame(MessageKind::Error, msg.as_bytes())
}

pub fn decode_error(bytes: &[u8]) -> Result<String> {
    let r = open_frame(bytes, MessageKind::Error)?;
    String::from_utf8(bytes[HEADER_LEN..].to_vec()).map_err(|_| r.error("error text is not UTF-8"))
}

/// Reads one whole frame from a stream. Oversize lengths are rejected
/// before any body bytes are read.
pub fn read_frame<R: Read>(stream: &mut R, max_payload: u64) -> Result<Vec<u8>> {
    let mut header = [0u8; HEADER_LEN];
    stream.read_exact(&mut header)?;
    let h = WireHeader::decode(&header)?;
    if h.len > max_payload {
        return Err(parse(7, format!("payload of {} bytes exceeds limit {max_payload}", h.len)));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + h.len as usize);
    out.extend_from_slice(&header);
    out.resize(HEADER_LEN + h.len as usize, 0);
    stream.read_exact(&mut out[HEADER_LEN..])?;
    Ok(out)
}

pub fn write_frame<W: Write>(stream: &mut W, bytes: &[u8]) -> Result<()> {
    stream.write_all(bytes)?;
    stream.flush()?;
    Ok(())
}

/// Kind of a complete frame without decoding its body.
pub fn peek_kind(bytes: &[u8]) -> Result<MessageKind> {
    Ok(WireHeader::decode(bytes)?.kind)
}
