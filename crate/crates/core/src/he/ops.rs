use rand::RngCore;

use super::automorphism::{apply_ntt_permutation, ntt_permutation};
use super::bfv::{encrypt_zero, BfvCiphertext};
use super::gadget::{digit_decompose, GadgetConfig};
use super::keys::{ConversionKey, EvalKey, SecretKey};
use super::params::HeParams;
use crate::error::{invalid_arg, Result};
use crate::ring::{Domain, RnsPoly};

/// `sum_i Dcp(x)_i ⊙ rows[i]`: a ciphertext whose phase is `x` times whatever
/// the rows encrypt (divided by their gadget weights).
pub fn key_switch(x: &RnsPoly, rows: &[BfvCiphertext], gadget: &GadgetConfig) -> Result<BfvCiphertext> {
    if rows.len() != gadget.ell() {
        return invalid_arg(format!("key has {} rows, gadget expects {}", rows.len(), gadget.ell()));
    }
    let digits = digit_decompose(x, gadget)?;
    let mut acc_a = RnsPoly::zero(x.basis(), Domain::Ntt);
    let mut acc_b = RnsPoly::zero(x.basis(), Domain::Ntt);
    for (d, row) in digits.iter().zip(rows) {
        acc_a.mul_acc_unchecked(d, row.a());
        acc_b.mul_acc_unchecked(d, row.b());
    }
    Ok(BfvCiphertext::from_parts_unchecked(acc_a, acc_b))
}

/// Homomorphic `sigma_k`: the result decrypts under `s` to `sigma_k(m)`.
pub fn subs(ct: &BfvCiphertext, evk: &EvalKey, params: &HeParams) -> Result<BfvCiphertext> {
    let perm = ntt_permutation(params.degree(), evk.index())?;
    let sa = apply_ntt_permutation(ct.a(), &perm);
    let sb = apply_ntt_permutation(ct.b(), &perm);
    let mut out = key_switch(&sa, evk.rows(), params.gadget())?;
    out.b_mut().add_assign_unchecked(&sb);
    Ok(out)
}

/// RGSW encryption of a bit: rows `0..ell` have phase `mu·z^i·s`, rows
/// `ell..2ell` have phase `mu·z^i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgswCiphertext {
    rows: Vec<BfvCiphertext>,
}

impl RgswCiphertext {
    pub fn from_rows(rows: Vec<BfvCiphertext>) -> Result<Self> {
        if rows.is_empty() || !rows.len().is_multiple_of(2) {
            return invalid_arg(format!("RGSW needs an even, non-zero row count, got {}", rows.len()));
        }
        Ok(RgswCiphertext { rows })
    }

    /// Assembles from the `s`-weighted half and the plain half.
    pub fn from_halves(a_rows: Vec<BfvCiphertext>, b_rows: Vec<BfvCiphertext>) -> Result<Self> {
        if a_rows.len() != b_rows.len() {
            return invalid_arg("RGSW halves differ in length");
        }
        let mut rows = a_rows;
        rows.extend(b_rows);
        Self::from_rows(rows)
    }

    #[inline]
    pub fn ell(&self) -> usize {
        self.rows.len() / 2
    }

    #[inline]
    pub fn rows(&self) -> &[BfvCiphertext] {
        &self.rows
    }

    pub fn a_rows(&self) -> &[BfvCiphertext] {
        &self.rows[..self.ell()]
    }

    pub fn b_rows(&self) -> &[BfvCiphertext] {
        &self.rows[self.ell()..]
    }

    pub fn byte_len(&self) -> usize {
        self.rows.iter().map(|r| r.byte_len()).sum()
    }
}

/// Fresh RGSW encryption of `mu`.
pub fn gen_rgsw<R: RngCore + ?Sized>(
    sk: &SecretKey,
    mu: bool,
    params: &HeParams,
    rng: &mut R,
) -> Result<RgswCiphertext> {
    let g = params.gadget();
    let ell = g.ell();
    let mut rows = Vec::with_capacity(2 * ell);
    for half in 0..2 {
        for i in 0..ell {
            let mut ct = encrypt_zero(sk, params, rng)?;
            if mu {
                let target = if half == 0 { ct.a_mut() } else { ct.b_mut() };
                add_gadget_weight(target, g, i);
            }
            rows.push(ct);
        }
    }
    RgswCiphertext::from_rows(rows)
}

fn add_gadget_weight(p: &mut RnsPoly, g: &GadgetConfig, i: usize) {
    for (m, limb) in p.limbs_with_moduli_mut() {
        let w = g.weight_mod(i, m);
        for x in limb.iter_mut() {
            *x = m.add(*x, w);
        }
    }
}

/// `ct ⊡ C`: decrypts to `mu·m` when `ct` encrypts `m` and `C` encrypts `mu`.
pub fn external_product(ct: &BfvCiphertext, rgsw: &RgswCiphertext, params: &HeParams) -> Result<BfvCiphertext> {
    let g = params.gadget();
    if rgsw.ell() != g.ell() {
        return invalid_arg(format!("RGSW has {} digit rows, gadget expects {}", rgsw.ell(), g.ell()));
    }
    let mut out = key_switch(ct.a(), rgsw.a_rows(), g)?;
    let from_b = key_switch(ct.b(), rgsw.b_rows(), g)?;
    out.add_assign_unchecked(&from_b);
    Ok(out)
}

/// Turns a ciphertext with phase `φ` into one with phase `φ·s`:
/// `(b, 0)` contributes `b·s`, and the key switch of `a` contributes `a·s^2`.
pub fn multiply_by_secret(ct: &BfvCiphertext, ck: &ConversionKey, params: &HeParams) -> Result<BfvCiphertext> {
    let mut out = key_switch(ct.a(), ck.rows(), params.gadget())?;
    out.a_mut().add_assign_unchecked(ct.b());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::he::{decrypt, encrypt, noise_budget};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (HeParams, SecretKey, ChaCha20Rng) {
        let params = HeParams::with_degree(64, 16).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let sk = SecretKey::generate(&params, &mut rng);
        (params, sk, rng)
    }

    #[test]
    fn rgsw_selects_or_zeroes() {
        let (params, sk, mut rng) = setup();
        let msg: Vec<u64> = (0..64).map(|_| rng.gen_range(0..1 << 16)).collect();
        let ct = encrypt(&sk, &msg, &params, &mut rng).unwrap();
        let one = gen_rgsw(&sk, true, &params, &mut rng).unwrap();
        let zero = gen_rgsw(&sk, false, &params, &mut rng).unwrap();
        assert_eq!(decrypt(&sk, &external_product(&ct, &one, &params).unwrap(), &params).unwrap(), msg);
        let z = external_product(&ct, &zero, &params).unwrap();
        assert!(decrypt(&sk, &z, &params).unwrap().iter().all(|&c| c == 0));
        assert!(noise_budget(&sk, &z, &params).unwrap().budget_bits > 10.0);
    }

    #[test]
    fn secret_multiplication_matches_fresh_rgsw_row() {
        let (params, sk, mut rng) = setup();
        let ck = ConversionKey::generate(&sk, &params, &mut rng).unwrap();
        let ct = encrypt(&sk, &[5, 7], &params, &mut rng).unwrap();
        let lifted = multiply_by_secret(&ct, &ck, &params).unwrap();
        // phase(lifted) should equal phase(ct)·s up to small noise
        let mut expect = ct.a().pointwise_mul(sk.ntt()).unwrap();
        expect.add_assign_unchecked(ct.b());
        let expect = expect.pointwise_mul(sk.ntt()).unwrap();
        let mut got = lifted.a().pointwise_mul(sk.ntt()).unwrap();
        got.add_assign_unchecked(lifted.b());
        let diff = got.sub(&expect).unwrap().ntt_inverse().unwrap().crt_centered().unwrap();
        let worst = diff.iter().map(|d| d.unsigned_abs()).max().unwrap();
        assert!(worst < 1u128 << 40, "noise {worst}");
    }
}
