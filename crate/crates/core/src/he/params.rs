use std::sync::Arc;

use super::gadget::GadgetConfig;
use crate::error::{invalid_config, Result};
use crate::ring::RnsBasis;

/// Default ring degree.
pub const DEFAULT_N: usize = 1 << 12;
/// Default plaintext modulus bits (`P = 2^32`).
pub const DEFAULT_PLAIN_BITS: u32 = 32;
/// Default centered-binomial error bound.
pub const DEFAULT_ERROR_BOUND: u32 = 16;

/// Scheme parameters shared by client and server.
#[derive(Clone, Debug)]
pub struct HeParams {
    basis: Arc<RnsBasis>,
    plain_bits: u32,
    gadget: GadgetConfig,
    error_bound: u32,
    delta: u128,
}

impl PartialEq for HeParams {
    fn eq(&self, other: &Self) -> bool {
        *self.basis == *other.basis
            && self.plain_bits == other.plain_bits
            && self.gadget == other.gadget
            && self.error_bound == other.error_bound
    }
}

impl Eq for HeParams {}

impl HeParams {
    pub fn new(basis: Arc<RnsBasis>, plain_bits: u32, gadget: GadgetConfig, error_bound: u32) -> Result<Self> {
        if plain_bits == 0 || plain_bits > 32 {
            return invalid_config(format!("plaintext bits {plain_bits} outside 1..=32"));
        }
        let q = basis.q_u128();
        let p = 1u128 << plain_bits;
        if p >= q {
            return invalid_config("plaintext modulus must be below Q");
        }
        let delta = q / p;
        if delta <= 1 {
            return invalid_config("Q/P must exceed 1");
        }
        let reach = gadget.base_bits() as usize * gadget.ell();
        if reach < 128 && (1u128 << reach) <= q {
            return invalid_config(format!(
                "gadget z^ell = 2^{reach} does not exceed Q ({:.1} bits)",
                basis.log2_q()
            ));
        }
        if error_bound == 0 {
            return invalid_config("error bound must be positive");
        }
        Ok(HeParams {
            basis,
            plain_bits,
            gadget,
            error_bound,
            delta,
        })
    }

    /// `N = 2^12`, four 27-bit primes, `P = 2^32`, `z = 2^22`, `ell = 5`.
    pub fn default_params() -> Self {
        Self::with_degree(DEFAULT_N, DEFAULT_PLAIN_BITS).expect("default parameters are valid")
    }

    /// Default basis and gadget at another ring degree and plaintext width.
    pub fn with_degree(n: usize, plain_bits: u32) -> Result<Self> {
        let basis = Arc::new(RnsBasis::default_for(n)?);
        Self::new(basis, plain_bits, GadgetConfig::default(), DEFAULT_ERROR_BOUND)
    }

    #[inline]
    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    #[inline]
    pub fn limb_count(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    pub fn plain_bits(&self) -> u32 {
        self.plain_bits
    }

    #[inline]
    pub fn plain_modulus(&self) -> u64 {
        1u64 << self.plain_bits
    }

    #[inline]
    pub fn gadget(&self) -> &GadgetConfig {
        &self.gadget
    }

    #[inline]
    pub fn error_bound(&self) -> u32 {
        self.error_bound
    }

    /// `floor(Q / P)`.
    #[inline]
    pub fn delta(&self) -> u128 {
        self.delta
    }

    /// Bytes of one polynomial's residues, `k·N·4`.
    pub fn poly_bytes(&self) -> usize {
        self.limb_count() * self.degree() * 4
    }

    /// Bytes of one BFV ciphertext's residues.
    pub fn ct_bytes(&self) -> usize {
        2 * self.poly_bytes()
    }

    /// Plaintext capacity of one polynomial in bytes, `N·log2(P)/8`.
    pub fn plaintext_bytes(&self) -> usize {
        self.degree() * self.plain_bits as usize / 8
    }
}
