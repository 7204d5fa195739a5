use crate::error::{invalid_arg, Result};

/// Largest supported prime. Keeping `2q < 2^32` lets lazy butterflies and
/// Shoup products stay in 32/64-bit words.
pub const MAX_PRIME: u32 = 1 << 31;

/// An NTT-friendly prime `q ≡ 1 (mod 2N)` together with its twiddle tables
/// for one ring degree `N`.
#[derive(Clone, Debug)]
pub struct Modulus {
    q: u32,
    n: usize,
    log_n: u32,
    psi: u32,
    barrett: u64,
    two_pow_64: u32,
    n_inv: u32,
    n_inv_shoup: u32,
    // psi^brv(i), the layout the Cooley-Tukey loop walks
    psi_rev: Vec<u32>,
    psi_rev_shoup: Vec<u32>,
    psi_inv_rev: Vec<u32>,
    psi_inv_rev_shoup: Vec<u32>,
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.n == other.n && self.psi == other.psi
    }
}

impl Eq for Modulus {}

impl Modulus {
    /// Builds tables for prime `q` and ring degree `n`. The primitive `2n`-th
    /// root is the smallest one reachable as `g^((q-1)/2n)` for `g = 2, 3, ...`.
    pub fn new(q: u32, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return invalid_arg(format!("ring degree {n} is not a power of two >= 2"));
        }
        if q >= MAX_PRIME {
            return invalid_arg(format!("modulus {q} must be below 2^31"));
        }
        if !is_prime(q) {
            return invalid_arg(format!("modulus {q} is not prime"));
        }
        let two_n = 2 * n as u64;
        if !(q as u64 - 1).is_multiple_of(two_n) {
            return invalid_arg(format!("modulus {q} is not 1 mod {two_n}"));
        }
        let barrett = u64::MAX / q as u64;
        let mut m = Modulus {
            q,
            n,
            log_n: n.trailing_zeros(),
            psi: 0,
            barrett,
            two_pow_64: 0,
            n_inv: 0,
            n_inv_shoup: 0,
            psi_rev: Vec::new(),
            psi_rev_shoup: Vec::new(),
            psi_inv_rev: Vec::new(),
            psi_inv_rev_shoup: Vec::new(),
        };
        let exp = (q as u64 - 1) / two_n;
        let psi = (2..q)
            .map(|g| m.pow(g, exp))
            .find(|&cand| m.pow(cand, n as u64) == q - 1)
            .expect("a prime with 2n | q-1 has a primitive 2n-th root");
        m.psi = psi;
        m.two_pow_64 = m.add(m.reduce_u64(u64::MAX), 1 % q);
        let psi_inv = m.inv(psi);
        m.n_inv = m.inv(n as u32 % q);
        m.n_inv_shoup = m.shoup(m.n_inv);

        let mut psi_rev = vec![0u32; n];
        let mut psi_inv_rev = vec![0u32; n];
        let (mut pw, mut pw_inv) = (1u32, 1u32);
        for i in 0..n {
            let r = bit_reverse(i, m.log_n);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = m.mul(pw, psi);
            pw_inv = m.mul(pw_inv, psi_inv);
        }
        m.psi_rev_shoup = psi_rev.iter().map(|&w| m.shoup(w)).collect();
        m.psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| m.shoup(w)).collect();
        m.psi_rev = psi_rev;
        m.psi_inv_rev = psi_inv_rev;
        Ok(m)
    }

    #[inline]
    pub fn value(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.n
    }

    /// The primitive `2N`-th root of unity used by the transform.
    #[inline]
    pub fn two_n_root(&self) -> u32 {
        self.psi
    }

    #[inline]
    pub fn reduce_u64(&self, x: u64) -> u32 {
        let qhat = ((x as u128 * self.barrett as u128) >> 64) as u64;
        let mut r = x - qhat * self.q as u64;
        if r >= self.q as u64 {
            r -= self.q as u64;
        }
        r as u32
    }

    /// Reduces a 128-bit accumulator, e.g. a sum of many 62-bit products.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u32 {
        let hi = self.reduce_u64((x >> 64) as u64);
        let lo = self.reduce_u64(x as u64);
        self.add(self.mul(hi, self.two_pow_64), lo)
    }

    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u32 {
        x.rem_euclid(self.q as i64) as u32
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u32 {
        x.rem_euclid(self.q as i128) as u32
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.reduce_u64(a as u64 * b as u64)
    }

    /// `floor(w * 2^32 / q)`, the companion constant for [`Self::mul_shoup`].
    #[inline]
    pub fn shoup(&self, w: u32) -> u32 {
        (((w as u64) << 32) / self.q as u64) as u32
    }

    #[inline]
    pub fn mul_shoup(&self, a: u32, w: u32, w_shoup: u32) -> u32 {
        let qhat = (a as u64 * w_shoup as u64) >> 32;
        let r = (a as u64 * w as u64).wrapping_sub(qhat * self.q as u64) as u32;
        if r >= self.q {
            r - self.q
        } else {
            r
        }
    }

    pub fn pow(&self, base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32 % self.q;
        let mut b = base % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Inverse via Fermat; `a` must be non-zero mod q.
    pub fn inv(&self, a: u32) -> u32 {
        debug_assert!(!a.is_multiple_of(self.q));
        self.pow(a, self.q as u64 - 2)
    }

    /// In-place negacyclic forward transform. Output is in bit-reversed
    /// evaluation order: slot `j` holds `p(psi^(2*brv(j)+1))`.
    pub fn ntt_forward_inplace(&self, a: &mut [u32]) {
        debug_assert_eq!(a.len(), self.n);
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = self.mul_shoup(*y, w, ws);
                    *x = self.add(u, v);
                    *y = self.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    /// In-place inverse of [`Self::ntt_forward_inplace`], including the `1/N` scale.
    pub fn ntt_inverse_inplace(&self, a: &mut [u32]) {
        debug_assert_eq!(a.len(), self.n);
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = self.add(u, v);
                    *y = self.mul_shoup(self.sub(u, v), w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

#[inline]
pub(crate) fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Trial division; the candidates here are at most 31 bits.
pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    if q.is_multiple_of(2) {
        return q == 2;
    }
    let mut d = 3u32;
    while (d as u64) * (d as u64) <= q as u64 {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Finds `count` distinct primes `q ≡ 1 (mod 2n)` below `2^bits`, largest first.
pub fn ntt_primes(n: usize, count: usize, bits: u32) -> Result<Vec<u32>> {
    if !(2..=31).contains(&bits) {
        return invalid_arg(format!("prime bit-width {bits} outside 2..=31"));
    }
    let step = 2 * n as u64;
    let top = 1u64 << bits;
    let mut out = Vec::with_capacity(count);
    // largest candidate below 2^bits that is 1 mod 2n
    let mut cand = ((top - 1) / step) * step + 1;
    if cand >= top {
        cand = cand.saturating_sub(step);
    }
    while out.len() < count {
        if cand <= step {
            return invalid_arg(format!(
                "only {} primes 1 mod {step} below 2^{bits}",
                out.len()
            ));
        }
        if is_prime(cand as u32) {
            out.push(cand as u32);
        }
        cand -= step;
    }
    Ok(out)
}
