use std::sync::Arc;

use rayon::prelude::*;

use super::config::DbConfig;
use crate::error::{invalid_arg, Result};
use crate::he::HeParams;
use crate::layout::{transpose_ct_tensor, Layout, Tensor3};
use crate::ring::{Domain, RnsBasis, RnsPoly};

/// Packs bytes little-endian into `bits`-wide coefficients.
pub fn pack_bytes(bytes: &[u8], bits: u32, n: usize) -> Result<Vec<u64>> {
    let capacity = n * bits as usize / 8;
    if bytes.len() > capacity {
        return invalid_arg(format!("{} bytes exceed plaintext capacity {capacity}", bytes.len()));
    }
    let mut out = vec![0u64; n];
    if bits.is_multiple_of(8) {
        for (slot, chunk) in out.iter_mut().zip(bytes.chunks(bits as usize / 8)) {
            *slot = chunk.iter().rev().fold(0u64, |acc, &b| acc << 8 | b as u64);
        }
        return Ok(out);
    }
    for (byte_idx, &byte) in bytes.iter().enumerate() {
        for bit in 0..8 {
            if (byte >> bit) & 1 == 1 {
                let pos = byte_idx * 8 + bit;
                out[pos / bits as usize] |= 1u64 << (pos % bits as usize);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pack_bytes`], returning the first `len` bytes.
pub fn unpack_bytes(coeffs: &[u64], bits: u32, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    if bits.is_multiple_of(8) {
        let w = bits as usize / 8;
        for (i, byte) in out.iter_mut().enumerate() {
            let c = coeffs.get(i / w).copied().unwrap_or(0);
            *byte = (c >> (8 * (i % w))) as u8;
        }
        return out;
    }
    for (byte_idx, byte) in out.iter_mut().enumerate() {
        for bit in 0..8 {
            let pos = byte_idx * 8 + bit;
            let c = coeffs.get(pos / bits as usize).copied().unwrap_or(0);
            *byte |= (((c >> (pos % bits as usize)) & 1) as u8) << bit;
        }
    }
    out
}

/// Lifts plaintext coefficients in `[0, P)` to their centered
/// representatives and transforms to the NTT domain.
pub fn plaintext_poly(coeffs: &[u64], params: &HeParams) -> Result<RnsPoly> {
    let p = params.plain_modulus() as i64;
    let centered: Vec<i64> = coeffs
        .iter()
        .map(|&c| {
            let c = c as i64;
            if c >= p / 2 {
                c - p
            } else {
                c
            }
        })
        .collect();
    RnsPoly::from_signed(params.basis(), &centered)?.ntt_forward()
}

/// The DB as a `(P, D0, D1)` tensor of NTT-domain plaintext residues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedDatabase {
    config: DbConfig,
    basis: Arc<RnsBasis>,
    tensor: Tensor3,
}

impl EncodedDatabase {
    pub fn from_tensor(config: DbConfig, basis: Arc<RnsBasis>, tensor: Tensor3) -> Result<Self> {
        let want = [basis.len() * basis.degree(), config.d0, config.d1];
        if tensor.dims() != want {
            return invalid_arg(format!("tensor dims {:?} do not match {want:?}", tensor.dims()));
        }
        Ok(EncodedDatabase { config, basis, tensor })
    }

    #[inline]
    pub fn config(&self) -> &DbConfig {
        &self.config
    }

    #[inline]
    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    #[inline]
    pub fn layout(&self) -> Layout {
        self.tensor.layout()
    }

    #[inline]
    pub fn tensor(&self) -> &Tensor3 {
        &self.tensor
    }

    /// Re-lays the residues out; the record contents are unchanged.
    pub fn with_layout(&self, layout: Layout) -> EncodedDatabase {
        EncodedDatabase {
            config: self.config,
            basis: self.basis.clone(),
            tensor: transpose_ct_tensor(&self.tensor, layout),
        }
    }

    /// The NTT-domain plaintext at `(row, col)`.
    pub fn poly(&self, row: usize, col: usize) -> RnsPoly {
        let np = self.tensor.dims()[0];
        let data = match self.tensor.fiber(row, col) {
            Some(f) => f.to_vec(),
            None => (0..np).map(|p| self.tensor.get(p, row, col)).collect(),
        };
        RnsPoly::from_data_unchecked(&self.basis, data, Domain::Ntt)
    }

    pub fn encoded_bytes(&self) -> usize {
        self.tensor.byte_len()
    }

    /// Recovers the record bytes at `(row, col)` without any encryption.
    pub fn decode_record(&self, row: usize, col: usize, params: &HeParams) -> Result<Vec<u8>> {
        let coeff = self.poly(row, col).ntt_inverse()?;
        let p = params.plain_modulus() as i128;
        let values: Vec<u64> = coeff
            .crt_centered()?
            .into_iter()
            .map(|c| c.rem_euclid(p) as u64)
            .collect();
        Ok(unpack_bytes(&values, params.plain_bits(), self.config.record_bytes))
    }

    /// Column slice `[c_lo, c_hi)` as its own database.
    pub fn column_slice(&self, c_lo: usize, c_hi: usize) -> Result<EncodedDatabase> {
        if c_lo >= c_hi || c_hi > self.config.d1 {
            return invalid_arg(format!("column range [{c_lo}, {c_hi}) invalid for D1 = {}", self.config.d1));
        }
        let config = DbConfig::new(self.config.d0, c_hi - c_lo, self.config.record_bytes)?;
        let np = self.tensor.dims()[0];
        let t = Tensor3::from_fn([np, config.d0, config.d1], self.layout(), |p, i, j| {
            self.tensor.get(p, i, c_lo + j)
        });
        EncodedDatabase::from_tensor(config, self.basis.clone(), t)
    }
}

/// Encodes `D0·D1` records (row-major) into NTT-domain plaintexts.
pub fn encode_database<R: AsRef<[u8]> + Sync>(
    records: &[R],
    config: &DbConfig,
    params: &HeParams,
    layout: Layout,
) -> Result<EncodedDatabase> {
    config.validate_for(params)?;
    if records.len() != config.records() {
        return invalid_arg(format!("expected {} records, got {}", config.records(), records.len()));
    }
    if let Some((i, r)) = records
        .iter()
        .enumerate()
        .find(|(_, r)| r.as_ref().len() > config.record_bytes)
    {
        return invalid_arg(format!(
            "record {i} has {} bytes, limit is {}",
            r.as_ref().len(),
            config.record_bytes
        ));
    }
    let n = params.degree();
    let polys = records
        .par_iter()
        .map(|r| plaintext_poly(&pack_bytes(r.as_ref(), params.plain_bits(), n)?, params))
        .collect::<Result<Vec<_>>>()?;
    let np = params.limb_count() * n;
    let mut data = Vec::with_capacity(np * polys.len());
    for p in &polys {
        data.extend_from_slice(p.data());
    }
    // records are row-major, matching p-major [row][col][p]
    let t = Tensor3::from_data([np, config.d0, config.d1], Layout::PMajor, data)?;
    let t = if layout == Layout::PMajor {
        t
    } else {
        transpose_ct_tensor(&t, layout)
    };
    EncodedDatabase::from_tensor(*config, params.basis().clone(), t)
}
