use num_bigint::{BigInt, BigUint};

use super::modulus::{ntt_primes, Modulus};
use crate::error::{invalid_arg, Result};

/// Most limbs a basis may hold. With primes below 2^31 this keeps `Q < 2^124`,
/// so CRT reconstruction runs in `u128`.
pub const MAX_LIMBS: usize = 4;

/// Ordered RNS primes for one ring degree, plus CRT reconstruction constants.
#[derive(Debug)]
pub struct RnsBasis {
    n: usize,
    moduli: Vec<Modulus>,
    big_q: BigUint,
    q: u128,
    half_q: u128,
    // Q / q_i
    punctured: Vec<u128>,
    // (Q / q_i)^-1 mod q_i
    punctured_inv: Vec<u32>,
}

impl PartialEq for RnsBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.moduli == other.moduli
    }
}

impl Eq for RnsBasis {}

impl RnsBasis {
    pub fn new(n: usize, primes: &[u32]) -> Result<Self> {
        if primes.is_empty() || primes.len() > MAX_LIMBS {
            return invalid_arg(format!("basis needs 1..={MAX_LIMBS} primes, got {}", primes.len()));
        }
        for (i, p) in primes.iter().enumerate() {
            if primes[..i].contains(p) {
                return invalid_arg(format!("duplicate RNS prime {p}"));
            }
        }
        let moduli = primes
            .iter()
            .map(|&p| Modulus::new(p, n))
            .collect::<Result<Vec<_>>>()?;
        let q: u128 = primes.iter().map(|&p| p as u128).product();
        let big_q = primes.iter().map(|&p| BigUint::from(p)).product();
        let punctured: Vec<u128> = primes.iter().map(|&p| q / p as u128).collect();
        let punctured_inv = moduli
            .iter()
            .zip(&punctured)
            .map(|(m, &pi)| m.inv((pi % m.value() as u128) as u32))
            .collect();
        Ok(RnsBasis {
            n,
            moduli,
            big_q,
            q,
            half_q: q / 2,
            punctured,
            punctured_inv,
        })
    }

    /// `count` primes of at most `bits` bits, found by [`ntt_primes`].
    pub fn generate(n: usize, count: usize, bits: u32) -> Result<Self> {
        Self::new(n, &ntt_primes(n, count, bits)?)
    }

    /// Four 27-bit primes: `Q` just under `2^108`.
    pub fn default_for(n: usize) -> Result<Self> {
        Self::generate(n, 4, 27)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    #[inline]
    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    #[inline]
    pub fn modulus(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    pub fn primes(&self) -> Vec<u32> {
        self.moduli.iter().map(|m| m.value()).collect()
    }

    /// The full modulus `Q` as an arbitrary-precision integer.
    pub fn big_q(&self) -> &BigUint {
        &self.big_q
    }

    #[inline]
    pub fn q_u128(&self) -> u128 {
        self.q
    }

    /// `log2(Q)` as a float, for budget reporting.
    pub fn log2_q(&self) -> f64 {
        self.moduli.iter().map(|m| (m.value() as f64).log2()).sum()
    }

    /// Largest magnitude of a centered representative, `(Q-1)/2`.
    #[inline]
    pub fn half_q(&self) -> u128 {
        self.half_q
    }

    /// Unique value in `[0, Q)` congruent to `residues[i]` mod `q_i`.
    #[inline]
    pub fn crt_u128(&self, residues: impl Iterator<Item = u32>) -> u128 {
        let mut acc: u128 = 0;
        for (i, r) in residues.enumerate() {
            let m = &self.moduli[i];
            let t = m.mul(r, self.punctured_inv[i]) as u128;
            // t < q_i so each term is below Q; four terms stay below 2^126
            acc += t * self.punctured[i];
        }
        while acc >= self.q {
            acc -= self.q;
        }
        acc
    }

    /// Centered CRT value in `[-(Q-1)/2, (Q-1)/2]`.
    #[inline]
    pub fn crt_centered(&self, residues: impl Iterator<Item = u32>) -> i128 {
        let v = self.crt_u128(residues);
        if v > self.half_q {
            v as i128 - self.q as i128
        } else {
            v as i128
        }
    }

    /// Checks that `x` lies in the centered range.
    pub fn in_centered_range(&self, x: &BigInt) -> bool {
        let half = BigInt::from(self.half_q);
        x <= &half && x >= &-half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_basis_is_about_2_108() {
        let b = RnsBasis::default_for(4096).unwrap();
        assert_eq!(b.len(), 4);
        let lq = b.log2_q();
        assert!(lq > 107.9 && lq < 108.0, "log2 Q = {lq}");
        let prod: BigUint = b.primes().iter().map(|&p| BigUint::from(p)).product();
        assert_eq!(&prod, b.big_q());
        assert_eq!(BigUint::from(b.q_u128()), prod);
    }

    #[test]
    fn rejects_duplicates_and_oversize() {
        assert!(RnsBasis::new(16, &[97, 97]).is_err());
        assert!(RnsBasis::new(16, &[]).is_err());
        let ps = ntt_primes(16, 5, 20).unwrap();
        assert!(RnsBasis::new(16, &ps).is_err());
    }
}
