use rand::RngCore;

use super::keys::SecretKey;
use super::params::HeParams;
use crate::error::{invalid_arg, invalid_state, Result};
use crate::ring::{same_basis, sample_error, sample_uniform, Domain, RnsPoly};

/// A BFV ciphertext `(a, b)` with phase `b + a·s`, both parts in the NTT domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BfvCiphertext {
    a: RnsPoly,
    b: RnsPoly,
}

impl BfvCiphertext {
    pub fn new(a: RnsPoly, b: RnsPoly) -> Result<Self> {
        if a.domain() != Domain::Ntt || b.domain() != Domain::Ntt {
            return invalid_state("ciphertext parts must be in the NTT domain");
        }
        if !same_basis(a.basis(), b.basis()) {
            return invalid_arg("ciphertext parts use different bases");
        }
        Ok(BfvCiphertext { a, b })
    }

    pub(crate) fn from_parts_unchecked(a: RnsPoly, b: RnsPoly) -> Self {
        debug_assert!(a.domain() == Domain::Ntt && b.domain() == Domain::Ntt);
        BfvCiphertext { a, b }
    }

    /// The trivial encryption of zero.
    pub fn zero(params: &HeParams) -> Self {
        let z = RnsPoly::zero(params.basis(), Domain::Ntt);
        BfvCiphertext { a: z.clone(), b: z }
    }

    #[inline]
    pub fn a(&self) -> &RnsPoly {
        &self.a
    }

    #[inline]
    pub fn b(&self) -> &RnsPoly {
        &self.b
    }

    pub(crate) fn a_mut(&mut self) -> &mut RnsPoly {
        &mut self.a
    }

    pub(crate) fn b_mut(&mut self) -> &mut RnsPoly {
        &mut self.b
    }

    pub fn into_parts(self) -> (RnsPoly, RnsPoly) {
        (self.a, self.b)
    }

    pub fn byte_len(&self) -> usize {
        self.a.byte_len() + self.b.byte_len()
    }

    fn check(&self, other: &BfvCiphertext) -> Result<()> {
        if !same_basis(self.a.basis(), other.a.basis()) {
            return invalid_arg("ciphertexts use different bases");
        }
        Ok(())
    }

    pub fn add(&self, other: &BfvCiphertext) -> Result<BfvCiphertext> {
        self.check(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other);
        Ok(out)
    }

    pub fn sub(&self, other: &BfvCiphertext) -> Result<BfvCiphertext> {
        self.check(other)?;
        let mut out = self.clone();
        out.sub_assign_unchecked(other);
        Ok(out)
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &BfvCiphertext) {
        self.a.add_assign_unchecked(&other.a);
        self.b.add_assign_unchecked(&other.b);
    }

    pub(crate) fn sub_assign_unchecked(&mut self, other: &BfvCiphertext) {
        self.a.sub_assign_unchecked(&other.a);
        self.b.sub_assign_unchecked(&other.b);
    }

    /// Multiplies both parts by an NTT-domain plaintext polynomial.
    pub fn mul_plain(&self, p: &RnsPoly) -> Result<BfvCiphertext> {
        Ok(BfvCiphertext {
            a: self.a.pointwise_mul(p)?,
            b: self.b.pointwise_mul(p)?,
        })
    }

    /// Multiplies both parts by an integer scalar.
    pub fn scalar_mul(&self, c: u64) -> BfvCiphertext {
        BfvCiphertext {
            a: self.a.scalar_mul(c),
            b: self.b.scalar_mul(c),
        }
    }
}

/// Encrypts an arbitrary NTT-domain phase: `b = -a·s + e + phase`.
pub fn encrypt_phase<R: RngCore + ?Sized>(
    sk: &SecretKey,
    phase: &RnsPoly,
    params: &HeParams,
    rng: &mut R,
) -> Result<BfvCiphertext> {
    if phase.domain() != Domain::Ntt {
        return invalid_state("encrypt_phase expects an NTT-domain phase");
    }
    if !same_basis(phase.basis(), params.basis()) {
        return invalid_arg("phase basis does not match parameters");
    }
    let basis = params.basis();
    let a = sample_uniform(basis, Domain::Ntt, rng);
    let mut e = sample_error(basis, params.error_bound(), rng);
    e.ntt_forward_inplace()?;
    let mut b = a.pointwise_mul(sk.ntt())?.neg();
    b.add_assign_unchecked(&e);
    b.add_assign_unchecked(phase);
    Ok(BfvCiphertext { a, b })
}

/// Fresh encryption of zero.
pub fn encrypt_zero<R: RngCore + ?Sized>(sk: &SecretKey, params: &HeParams, rng: &mut R) -> Result<BfvCiphertext> {
    encrypt_phase(sk, &RnsPoly::zero(params.basis(), Domain::Ntt), params, rng)
}

/// `Δ·m` in the NTT domain for plaintext coefficients in `[0, P)`.
pub fn scaled_plaintext(msg: &[u64], params: &HeParams) -> Result<RnsPoly> {
    let n = params.degree();
    if msg.len() > n {
        return invalid_arg(format!("message has {} coefficients, ring holds {n}", msg.len()));
    }
    let p = params.plain_modulus();
    if let Some(bad) = msg.iter().find(|&&m| m >= p) {
        return invalid_arg(format!("message coefficient {bad} not below P = {p}"));
    }
    let basis = params.basis();
    let delta = params.delta();
    let mut poly = RnsPoly::zero(basis, Domain::Coefficient);
    for li in 0..basis.len() {
        let m = basis.modulus(li);
        let d = (delta % m.value() as u128) as u32;
        let limb = poly.limb_mut(li);
        for (slot, &c) in limb.iter_mut().zip(msg) {
            *slot = m.mul(m.reduce_u64(c), d);
        }
    }
    poly.ntt_forward_inplace()?;
    Ok(poly)
}

/// Encrypts plaintext coefficients in `[0, P)`; missing coefficients are zero.
pub fn encrypt<R: RngCore + ?Sized>(
    sk: &SecretKey,
    msg: &[u64],
    params: &HeParams,
    rng: &mut R,
) -> Result<BfvCiphertext> {
    let phase = scaled_plaintext(msg, params)?;
    encrypt_phase(sk, &phase, params, rng)
}

/// Centered coefficients of `b + a·s`.
pub fn phase(sk: &SecretKey, ct: &BfvCiphertext) -> Result<Vec<i128>> {
    let mut ph = ct.a.pointwise_mul(sk.ntt())?;
    ph.add_assign_unchecked(&ct.b);
    ph.ntt_inverse_inplace()?;
    ph.crt_centered()
}

/// `round(P·v / Q) mod P` for `v` in `[0, Q)`, by binary long division.
fn scale_round(v: u128, q: u128, plain_bits: u32) -> u64 {
    let mut r = v;
    let mut quo: u128 = 0;
    for _ in 0..plain_bits {
        r <<= 1;
        quo <<= 1;
        if r >= q {
            r -= q;
            quo |= 1;
        }
    }
    if 2 * r >= q {
        quo += 1;
    }
    (quo & ((1u128 << plain_bits) - 1)) as u64
}

fn decode_phase(ph: &[i128], params: &HeParams) -> Vec<u64> {
    let q = params.basis().q_u128();
    ph.iter()
        .map(|&c| {
            let v = if c < 0 { (c + q as i128) as u128 } else { c as u128 };
            scale_round(v, q, params.plain_bits())
        })
        .collect()
}

/// Decrypts to `N` plaintext coefficients in `[0, P)`.
pub fn decrypt(sk: &SecretKey, ct: &BfvCiphertext, params: &HeParams) -> Result<Vec<u64>> {
    let ph = phase(sk, ct)?;
    Ok(decode_phase(&ph, params))
}

/// Largest centered `|phase - Δ·m|` over all coefficients, where `m` is the
/// decrypted message.
pub fn noise_magnitude(sk: &SecretKey, ct: &BfvCiphertext, params: &HeParams) -> Result<u128> {
    let ph = phase(sk, ct)?;
    let msg = decode_phase(&ph, params);
    let q = params.basis().q_u128() as i128;
    let delta = params.delta() as i128;
    let mut worst: u128 = 0;
    for (&c, &m) in ph.iter().zip(&msg) {
        let mut e = (c - delta * m as i128).rem_euclid(q);
        if e > q / 2 {
            e -= q;
        }
        worst = worst.max(e.unsigned_abs());
    }
    Ok(worst)
}

/// Remaining headroom of one ciphertext.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseReport {
    /// `log2(Δ/2) - log2(max |noise|)`, floored at 0.
    pub budget_bits: f64,
    pub max_noise: u128,
}

impl NoiseReport {
    /// Decryption is guaranteed correct only while budget remains.
    pub fn is_exhausted(&self) -> bool {
        self.budget_bits <= 0.0
    }
}

pub fn noise_budget(sk: &SecretKey, ct: &BfvCiphertext, params: &HeParams) -> Result<NoiseReport> {
    let max_noise = noise_magnitude(sk, ct, params)?;
    let headroom = (params.delta() as f64 / 2.0).log2() - (max_noise.max(1) as f64).log2();
    Ok(NoiseReport {
        budget_bits: headroom.max(0.0),
        max_noise,
    })
}
