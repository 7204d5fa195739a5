use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::he::HeParams;
use crate::layout::{transpose_ct_tensor, Layout, Tensor3};
use crate::protocol::{DbConfig, EncodedDatabase};
use crate::ring::RnsBasis;

pub const DB_MAGIC: [u8; 4] = *b"GPDB";
pub const DB_VERSION: u16 = 1;

/// Ring parameters stored alongside the database.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DbHeader {
    pub degree: usize,
    pub primes: Vec<u32>,
    pub plain_bits: u32,
    pub config: DbConfig,
}

impl DbHeader {
    pub fn from_params(params: &HeParams, config: &DbConfig) -> Self {
        DbHeader {
            degree: params.degree(),
            primes: params.basis().primes(),
            plain_bits: params.plain_bits(),
            config: *config,
        }
    }

    /// Byte length of the encoded header.
    pub fn byte_len(&self) -> usize {
        4 + 2 + 4 + 1 + 4 * self.primes.len() + 4 + 3 * 8
    }

    /// Errors unless `params` uses the same ring and plaintext width.
    pub fn check_params(&self, params: &HeParams) -> Result<()> {
        if self.degree != params.degree() || self.primes != params.basis().primes() || self.plain_bits != params.plain_bits() {
            return Err(Error::InvalidConfig(format!(
                "database was built for n={}, primes={:?}, plain_bits={}",
                self.degree, self.primes, self.plain_bits
            )));
        }
        Ok(())
    }

    fn encode(&self) -> Vec<u8> {
        let mut h = Vec::with_capacity(self.byte_len());
        h.extend_from_slice(&DB_MAGIC);
        h.extend_from_slice(&DB_VERSION.to_le_bytes());
        h.extend_from_slice(&(self.degree as u32).to_le_bytes());
        h.push(self.primes.len() as u8);
        for p in &self.primes {
            h.extend_from_slice(&p.to_le_bytes());
        }
        h.extend_from_slice(&self.plain_bits.to_le_bytes());
        for v in [self.config.d0, self.config.d1, self.config.record_bytes] {
            h.extend_from_slice(&(v as u64).to_le_bytes());
        }
        h
    }
}

fn parse(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        msg: msg.into(),
    }
}

/// Writes the container: header, then every record's plaintext limb-major
/// as little-endian words, records in row-major order.
pub fn write_db<W: Write>(out: W, db: &EncodedDatabase, params: &HeParams) -> Result<u64> {
    let mut w = BufWriter::new(out);
    let header = DbHeader::from_params(params, db.config());
    header.check_params(params)?;
    let head = header.encode();
    w.write_all(&head)?;
    let pm;
    let t = if db.layout() == Layout::PMajor {
        db.tensor()
    } else {
        pm = transpose_ct_tensor(db.tensor(), Layout::PMajor);
        &pm
    };
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in t.data().chunks(1 << 14) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok((head.len() + t.byte_len()) as u64)
}

pub fn save_db(path: &Path, db: &EncodedDatabase, params: &HeParams) -> Result<u64> {
    write_db(File::create(path)?, db, params)
}

/// Reads a container back, checking every residue against its prime.
pub fn read_db<R: Read>(input: R, layout: Layout) -> Result<(EncodedDatabase, DbHeader)> {
    let mut r = BufReader::new(input);
    let mut fixed = [0u8; 11];
    read_exact_at(&mut r, &mut fixed, 0)?;
    if fixed[..4] != DB_MAGIC {
        return Err(parse(0, "bad database magic"));
    }
    let version = u16::from_le_bytes([fixed[4], fixed[5]]);
    if version != DB_VERSION {
        return Err(parse(4, format!("unsupported database version {version}")));
    }
    let degree = u32::from_le_bytes(fixed[6..10].try_into().expect("4 bytes")) as usize;
    let k = fixed[10] as usize;
    let mut rest = vec![0u8; 4 * k + 4 + 24];
    read_exact_at(&mut r, &mut rest, 11)?;
    let word = |i: usize| u32::from_le_bytes(rest[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    let primes: Vec<u32> = (0..k).map(word).collect();
    let plain_bits = word(k);
    let long = |i: usize| {
        let at = 4 * k + 4 + 8 * i;
        u64::from_le_bytes(rest[at..at + 8].try_into().expect("8 bytes")) as usize
    };
    let config = DbConfig::new(long(0), long(1), long(2)).map_err(|e| parse(11 + 4 * k + 4, e.to_string()))?;
    let basis = Arc::new(RnsBasis::new(degree, &primes).map_err(|e| parse(6, e.to_string()))?);
    let header = DbHeader {
        degree,
        primes,
        plain_bits,
        config,
    };
    let base = header.byte_len();

    let np = k * degree;
    let total = np
        .checked_mul(config.records())
        .ok_or_else(|| parse(base, "database dimensions overflow"))?;
    let mut data = vec![0u32; total];
    let mut raw = vec![0u8; 4 * np];
    for (rec, poly) in data.chunks_mut(np).enumerate() {
        let at = base + rec * raw.len();
        read_exact_at(&mut r, &mut raw, at)?;
        for (idx, (dst, src)) in poly.iter_mut().zip(raw.chunks_exact(4)).enumerate() {
            let v = u32::from_le_bytes(src.try_into().expect("4 bytes"));
            if v >= basis.modulus(idx / degree).value() {
                return Err(parse(at + 4 * idx, format!("residue {v} out of range")));
            }
            *dst = v;
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(parse(base + 4 * total, "trailing bytes after payload"));
    }
    let t = Tensor3::from_data([np, config.d0, config.d1], Layout::PMajor, data)?;
    let t = if layout == Layout::PMajor {
        t
    } else {
        transpose_ct_tensor(&t, layout)
    };
    Ok((EncodedDatabase::from_tensor(config, basis, t)?, header))
}

pub fn load_db(path: &Path, layout: Layout) -> Result<(EncodedDatabase, DbHeader)> {
    read_db(File::open(path)?, layout)
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: usize) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => parse(offset, "truncated database file"),
        _ => Error::Io(e),
    })
}
