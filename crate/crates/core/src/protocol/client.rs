use rand::RngCore;

use super::config::DbConfig;
use super::database::unpack_bytes;
use crate::error::{invalid_arg, Result};
use crate::he::{
    decrypt, encrypt_phase, gen_rgsw, keygen, BfvCiphertext, ConversionKey, EvalKey, HeParams, RgswCiphertext,
    SecretKey,
};
use crate::ring::{Domain, RnsPoly};

/// Server-side key material for one client session: one automorphism key per
/// expansion stage plus the conversion key used to build RGSW rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKeys {
    pub evks: Vec<EvalKey>,
    pub conversion: ConversionKey,
}

impl PublicKeys {
    pub fn byte_len(&self) -> usize {
        self.evks.iter().map(|k| k.byte_len()).sum::<usize>() + self.conversion.byte_len()
    }

    /// The key for automorphism index `k`, if present.
    pub fn evk_for(&self, k: usize) -> Option<&EvalKey> {
        self.evks.iter().find(|e| e.index() == k)
    }
}

/// A client's secret plus the public half it uploads once per session.
#[derive(Clone, Debug)]
pub struct ClientKeys {
    pub sk: SecretKey,
    pub public: PublicKeys,
}

impl ClientKeys {
    /// Keys covering every expansion stage of `config`.
    pub fn generate<R: RngCore + ?Sized>(params: &HeParams, config: &DbConfig, rng: &mut R) -> Result<Self> {
        Self::generate_for_stages(params, config.expansion_stages(params.gadget().ell()), rng)
    }

    pub fn generate_for_stages<R: RngCore + ?Sized>(params: &HeParams, stages: usize, rng: &mut R) -> Result<Self> {
        let (sk, evks) = keygen(params, stages, rng)?;
        let conversion = ConversionKey::generate(&sk, params, rng)?;
        Ok(ClientKeys {
            sk,
            public: PublicKeys { evks, conversion },
        })
    }
}

/// One packed query ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientQuery {
    pub client_id: u64,
    pub ct: BfvCiphertext,
}

/// One response ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub ct: BfvCiphertext,
}

/// Coefficient-domain query phase. Slot `i*` carries `Δ`; slot
/// `D0 + j·ell + i` carries `bit_j(j*)·z^i`. Every slot is pre-multiplied by
/// `2^-L mod Q` so that `L` doubling stages of expansion land on exact values.
pub fn query_phase(row: usize, col: usize, config: &DbConfig, params: &HeParams) -> Result<RnsPoly> {
    config.validate_for(params)?;
    if row >= config.d0 || col >= config.d1 {
        return invalid_arg(format!(
            "index ({row}, {col}) outside {}x{} grid",
            config.d0, config.d1
        ));
    }
    let g = params.gadget();
    let ell = g.ell();
    let stages = config.expansion_stages(ell);
    let basis = params.basis();
    let mut poly = RnsPoly::zero(basis, Domain::Coefficient);
    for li in 0..basis.len() {
        let m = basis.modulus(li);
        let inv_scale = m.inv(m.pow(2, stages as u64));
        let limb = poly.limb_mut(li);
        let delta = (params.delta() % m.value() as u128) as u32;
        limb[row] = m.mul(delta, inv_scale);
        for j in 0..config.col_bits() {
            if (col >> j) & 1 == 1 {
                for i in 0..ell {
                    limb[config.d0 + j * ell + i] = m.mul(g.weight_mod(i, m), inv_scale);
                }
            }
        }
    }
    Ok(poly)
}

pub fn client_gen_query<R: RngCore + ?Sized>(
    sk: &SecretKey,
    client_id: u64,
    row: usize,
    col: usize,
    config: &DbConfig,
    params: &HeParams,
    rng: &mut R,
) -> Result<ClientQuery> {
    let phase = query_phase(row, col, config, params)?.ntt_forward()?;
    Ok(ClientQuery {
        client_id,
        ct: encrypt_phase(sk, &phase, params, rng)?,
    })
}

/// Reference mode: the client encrypts each column bit (LSB first) directly
/// as an RGSW ciphertext instead of relying on expansion.
pub fn client_gen_reference_rgsws<R: RngCore + ?Sized>(
    sk: &SecretKey,
    col: usize,
    config: &DbConfig,
    params: &HeParams,
    rng: &mut R,
) -> Result<Vec<RgswCiphertext>> {
    if col >= config.d1 {
        return invalid_arg(format!("column {col} outside 0..{}", config.d1));
    }
    (0..config.col_bits())
        .map(|j| gen_rgsw(sk, (col >> j) & 1 == 1, params, rng))
        .collect()
}

/// Decrypts and unpacks a response to the record bytes.
pub fn client_decode_response(
    sk: &SecretKey,
    response: &Response,
    config: &DbConfig,
    params: &HeParams,
) -> Result<Vec<u8>> {
    let coeffs = decrypt(sk, &response.ct, params)?;
    Ok(unpack_bytes(&coeffs, params.plain_bits(), config.record_bytes))
}
