//! RLWE/BFV encryption with gadget decomposition, key switching for
//! automorphisms, and RGSW external products.
//!
//! Ciphertexts are `(a, b)` pairs in the NTT domain with phase `b + a·s`.
//! A message `m` with coefficients in `[0, P)` is carried as `Δ·m`,
//! `Δ = floor(Q / P)`.

mod automorphism;
mod bfv;
mod gadget;
mod keys;
mod ops;
mod params;

pub use automorphism::{automorphism, monomial_mul, monomial_ntt, ntt_permutation};
pub use bfv::{
    decrypt, encrypt, encrypt_phase, encrypt_zero, noise_budget, noise_magnitude, phase, scaled_plaintext, NoiseReport,
    BfvCiphertext,
};
pub use gadget::{decompose_centered, digit_decompose, GadgetConfig};
pub use keys::{expansion_index, keygen, ConversionKey, EvalKey, SecretKey};
pub use ops::{external_product, gen_rgsw, key_switch, multiply_by_secret, subs, RgswCiphertext};
pub use params::{HeParams, DEFAULT_ERROR_BOUND, DEFAULT_N, DEFAULT_PLAIN_BITS};

pub(crate) use automorphism::apply_ntt_permutation;
pub(crate) use gadget::DigitStream;
