//! Exact polynomial arithmetic in `Z_Q[X]/(X^N + 1)` over an RNS basis.
//!
//! Every residue is kept canonical (`[0, q_i)`) after each operation. The
//! transform is the merged negacyclic Cooley-Tukey / Gentleman-Sande pair with
//! bit-reversed NTT-domain order; coefficient order is always natural.

mod basis;
mod modulus;
mod poly;
mod sample;

pub use basis::{RnsBasis, MAX_LIMBS};
pub use modulus::{is_prime, ntt_primes, Modulus, MAX_PRIME};
pub use poly::{crt_reconstruct, negacyclic_convolve_naive, rns_decompose, Domain, RnsPoly};
pub use sample::{sample_cbd, sample_error, sample_ternary, sample_uniform};

pub(crate) use modulus::bit_reverse;
pub(crate) use poly::{crt_centered_into, same_basis};
