use rand::RngCore;

use super::automorphism::automorphism;
use super::bfv::{encrypt_phase, BfvCiphertext};
use super::params::HeParams;
use crate::error::{invalid_arg, Result};
use crate::ring::{sample_ternary, Domain, RnsPoly};

/// Ternary secret `s`, held in the NTT domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    s: RnsPoly,
}

impl SecretKey {
    pub fn generate<R: RngCore + ?Sized>(params: &HeParams, rng: &mut R) -> Self {
        let s = sample_ternary(params.basis(), rng)
            .ntt_forward()
            .expect("fresh sample is in the coefficient domain");
        SecretKey { s }
    }

    /// Wraps an existing NTT-domain secret.
    pub fn from_ntt(s: RnsPoly) -> Result<Self> {
        if s.domain() != Domain::Ntt {
            return invalid_arg("secret key must be in the NTT domain");
        }
        Ok(SecretKey { s })
    }

    #[inline]
    pub fn ntt(&self) -> &RnsPoly {
        &self.s
    }
}

/// `ell` encryptions of `z^i · target` under `s`, the shared shape of
/// automorphism and conversion keys.
fn gadget_rows<R: RngCore + ?Sized>(
    sk: &SecretKey,
    target: &RnsPoly,
    params: &HeParams,
    rng: &mut R,
) -> Result<Vec<BfvCiphertext>> {
    let g = params.gadget();
    (0..g.ell())
        .map(|i| {
            let mut phase = target.clone();
            for (m, limb) in phase.limbs_with_moduli_mut() {
                let w = g.weight_mod(i, m);
                let ws = m.shoup(w);
                for x in limb.iter_mut() {
                    *x = m.mul_shoup(*x, w, ws);
                }
            }
            encrypt_phase(sk, &phase, params, rng)
        })
        .collect()
}

/// Key-switching key for `sigma_k`: row `i` encrypts `z^i · sigma_k(s)` under `s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalKey {
    k: usize,
    rows: Vec<BfvCiphertext>,
}

impl EvalKey {
    pub fn generate<R: RngCore + ?Sized>(sk: &SecretKey, k: usize, params: &HeParams, rng: &mut R) -> Result<Self> {
        let sigma_s = automorphism(sk.ntt(), k)?;
        let rows = gadget_rows(sk, &sigma_s, params, rng)?;
        Ok(EvalKey { k: k % (2 * params.degree()), rows })
    }

    pub fn from_rows(k: usize, rows: Vec<BfvCiphertext>) -> Result<Self> {
        if k.is_multiple_of(2) {
            return invalid_arg(format!("automorphism index {k} must be odd"));
        }
        if rows.is_empty() {
            return invalid_arg("evaluation key has no rows");
        }
        Ok(EvalKey { k, rows })
    }

    /// The automorphism index `k`.
    #[inline]
    pub fn index(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn rows(&self) -> &[BfvCiphertext] {
        &self.rows
    }

    pub fn byte_len(&self) -> usize {
        self.rows.iter().map(|r| r.byte_len()).sum()
    }
}

/// Relinearization-style key that multiplies a phase by `s`: row `i`
/// encrypts `z^i · s^2`. Lets the server build the `s`-weighted half of an
/// RGSW ciphertext from a plain BFV ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConversionKey {
    rows: Vec<BfvCiphertext>,
}

impl ConversionKey {
    pub fn generate<R: RngCore + ?Sized>(sk: &SecretKey, params: &HeParams, rng: &mut R) -> Result<Self> {
        let s2 = sk.ntt().pointwise_mul(sk.ntt())?;
        Ok(ConversionKey {
            rows: gadget_rows(sk, &s2, params, rng)?,
        })
    }

    pub fn from_rows(rows: Vec<BfvCiphertext>) -> Result<Self> {
        if rows.is_empty() {
            return invalid_arg("conversion key has no rows");
        }
        Ok(ConversionKey { rows })
    }

    #[inline]
    pub fn rows(&self) -> &[BfvCiphertext] {
        &self.rows
    }

    pub fn byte_len(&self) -> usize {
        self.rows.iter().map(|r| r.byte_len()).sum()
    }
}

/// Automorphism index used by expansion stage `t`: `N / 2^t + 1`.
pub fn expansion_index(n: usize, stage: usize) -> Result<usize> {
    if stage >= n.trailing_zeros() as usize {
        return invalid_arg(format!("expansion stage {stage} out of range for N = {n}"));
    }
    Ok((n >> stage) + 1)
}

/// Fresh secret plus one evaluation key per expansion stage `0..stages`.
pub fn keygen<R: RngCore + ?Sized>(
    params: &HeParams,
    stages: usize,
    rng: &mut R,
) -> Result<(SecretKey, Vec<EvalKey>)> {
    let sk = SecretKey::generate(params, rng);
    let evks = (0..stages)
        .map(|t| EvalKey::generate(&sk, expansion_index(params.degree(), t)?, params, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((sk, evks))
}
