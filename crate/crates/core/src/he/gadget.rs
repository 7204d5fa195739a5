use crate::error::{invalid_arg, invalid_state, Result};
use crate::ring::{crt_centered_into, Domain, RnsBasis, RnsPoly};

/// Power-of-two decomposition base `z = 2^base_bits` with `ell` digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GadgetConfig {
    base_bits: u32,
    ell: usize,
}

impl Default for GadgetConfig {
    fn default() -> Self {
        GadgetConfig { base_bits: 22, ell: 5 }
    }
}

impl GadgetConfig {
    /// Digits must fit a signed 32-bit word, so `base_bits <= 30`.
    pub fn new(base_bits: u32, ell: usize) -> Result<Self> {
        if !(1..=30).contains(&base_bits) {
            return invalid_arg(format!("gadget base bits {base_bits} outside 1..=30"));
        }
        if ell == 0 {
            return invalid_arg("gadget needs at least one digit");
        }
        Ok(GadgetConfig { base_bits, ell })
    }

    #[inline]
    pub fn base_bits(&self) -> u32 {
        self.base_bits
    }

    #[inline]
    pub fn base(&self) -> u64 {
        1u64 << self.base_bits
    }

    #[inline]
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// `z^i mod q`, the gadget weight of digit `i` in one limb.
    pub fn weight_mod(&self, i: usize, q: &crate::ring::Modulus) -> u32 {
        q.pow(q.reduce_u64(self.base()), i as u64)
    }
}

/// Centered base-`z` digits of `c`, least significant first.
///
/// All but the last digit are reduced into `(-z/2, z/2]` (a tie stays
/// positive); the last digit absorbs the remainder. For `|c| < z^ell / 2` every
/// digit lies in `[-z/2, z/2 + 1]` and `sum d_i z^i = c` exactly.
pub fn decompose_centered(c: i128, cfg: &GadgetConfig) -> Vec<i64> {
    let mut rem = c;
    (0..cfg.ell).map(|i| next_digit(&mut rem, cfg, i + 1 == cfg.ell)).collect()
}

#[inline]
fn next_digit(rem: &mut i128, cfg: &GadgetConfig, last: bool) -> i64 {
    if last {
        let d = *rem as i64;
        *rem = 0;
        return d;
    }
    let z = 1i128 << cfg.base_bits;
    let mut d = *rem & (z - 1);
    if d > z / 2 {
        d -= z;
    }
    *rem = (*rem - d) >> cfg.base_bits;
    d as i64
}

/// Emits the digit polynomials of one coefficient-domain input one at a time,
/// holding only the reconstructed centered coefficients in between.
pub(crate) struct DigitStream {
    rem: Vec<i128>,
    cfg: GadgetConfig,
    next: usize,
}

impl DigitStream {
    pub(crate) fn new(coeff: &RnsPoly, cfg: GadgetConfig) -> Self {
        debug_assert_eq!(coeff.domain(), Domain::Coefficient);
        let mut rem = vec![0i128; coeff.degree()];
        crt_centered_into(coeff, &mut rem);
        DigitStream { rem, cfg, next: 0 }
    }

    /// Bytes held by the reconstruction buffer.
    pub(crate) fn buffer_bytes(n: usize) -> usize {
        n * std::mem::size_of::<i128>()
    }

    /// Writes the next digit into `out` (coefficient domain, canonical residues).
    pub(crate) fn next_into(&mut self, basis: &RnsBasis, out: &mut [u32]) {
        debug_assert!(self.next < self.cfg.ell);
        let last = self.next + 1 == self.cfg.ell;
        let n = basis.degree();
        let k = basis.len();
        let cfg = self.cfg;
        let mut digits = vec![0i64; n];
        for (d, r) in digits.iter_mut().zip(self.rem.iter_mut()) {
            *d = next_digit(r, &cfg, last);
        }
        for li in 0..k {
            let m = basis.modulus(li);
            let q = m.value() as i64;
            let limb = &mut out[li * n..(li + 1) * n];
            for (slot, &d) in limb.iter_mut().zip(&digits) {
                *slot = if d >= 0 && d < q {
                    d as u32
                } else if d < 0 && -d < q {
                    (q + d) as u32
                } else {
                    d.rem_euclid(q) as u32
                };
            }
        }
        self.next += 1;
    }
}

/// Full digit decomposition of an NTT-domain polynomial: inverse NTT, CRT
/// reconstruction, centered digit extraction, then a forward NTT per digit.
pub fn digit_decompose(p: &RnsPoly, cfg: &GadgetConfig) -> Result<Vec<RnsPoly>> {
    if p.domain() != Domain::Ntt {
        return invalid_state("digit_decompose expects an NTT-domain polynomial");
    }
    let coeff = p.ntt_inverse()?;
    let basis = p.basis();
    let mut stream = DigitStream::new(&coeff, *cfg);
    let mut out = Vec::with_capacity(cfg.ell);
    for _ in 0..cfg.ell {
        let mut digit = RnsPoly::zero(basis, Domain::Coefficient);
        stream.next_into(basis, digit.data_mut());
        digit.ntt_forward_inplace()?;
        out.push(digit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_modulus_255_coefficient_13() {
        // Q = 255 (a test-only modulus), z = 4, ell = 4
        let cfg = GadgetConfig::new(2, 4).unwrap();
        let q = 255i128;
        let centered = if 13 > q / 2 { 13 - q } else { 13 };
        let d = decompose_centered(centered, &cfg);
        let recomposed: i128 = d.iter().enumerate().map(|(i, &x)| x as i128 * 4i128.pow(i as u32)).sum();
        assert_eq!(recomposed.rem_euclid(q), 13);
        assert!(d.iter().all(|&x| (-2..=3).contains(&x)), "{d:?}");
    }

    #[test]
    fn exhaustive_toy_range() {
        let cfg = GadgetConfig::new(2, 4).unwrap();
        for c in -127i128..=127 {
            let d = decompose_centered(c, &cfg);
            let r: i128 = d.iter().enumerate().map(|(i, &x)| x as i128 * 4i128.pow(i as u32)).sum();
            assert_eq!(r, c);
            assert!(d.iter().all(|&x| (-2..=3).contains(&x)), "c={c} {d:?}");
        }
    }

    #[test]
    fn zero_poly_gives_zero_digits() {
        let basis = std::sync::Arc::new(RnsBasis::default_for(16).unwrap());
        let z = RnsPoly::zero(&basis, Domain::Ntt);
        let ds = digit_decompose(&z, &GadgetConfig::default()).unwrap();
        assert_eq!(ds.len(), 5);
        assert!(ds.iter().all(|d| d.is_zero() && d.domain() == Domain::Ntt));
        let c = RnsPoly::zero(&basis, Domain::Coefficient);
        assert!(digit_decompose(&c, &GadgetConfig::default()).is_err());
    }
}
