use std::sync::Arc;

use num_bigint::BigInt;

use super::basis::RnsBasis;
use super::modulus::Modulus;
use crate::error::{invalid_arg, invalid_state, Result};

/// Representation of a polynomial's limbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// A ring element as `k` limbs of `N` residues, stored limb-major.
#[derive(Clone, Debug)]
pub struct RnsPoly {
    basis: Arc<RnsBasis>,
    data: Vec<u32>,
    domain: Domain,
}

impl PartialEq for RnsPoly {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.data == other.data && same_basis(&self.basis, &other.basis)
    }
}

impl Eq for RnsPoly {}

#[inline]
pub(crate) fn same_basis(a: &Arc<RnsBasis>, b: &Arc<RnsBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl RnsPoly {
    pub fn zero(basis: &Arc<RnsBasis>, domain: Domain) -> Self {
        RnsPoly {
            basis: basis.clone(),
            data: vec![0; basis.len() * basis.degree()],
            domain,
        }
    }

    /// Wraps limb-major residues, checking length and canonical range.
    pub fn from_data(basis: &Arc<RnsBasis>, data: Vec<u32>, domain: Domain) -> Result<Self> {
        let n = basis.degree();
        if data.len() != basis.len() * n {
            return invalid_arg(format!(
                "expected {} residues, got {}",
                basis.len() * n,
                data.len()
            ));
        }
        for (i, limb) in data.chunks_exact(n).enumerate() {
            let q = basis.modulus(i).value();
            if let Some(bad) = limb.iter().find(|&&r| r >= q) {
                return invalid_arg(format!("residue {bad} not below limb modulus {q}"));
            }
        }
        Ok(RnsPoly {
            basis: basis.clone(),
            data,
            domain,
        })
    }

    pub(crate) fn from_data_unchecked(basis: &Arc<RnsBasis>, data: Vec<u32>, domain: Domain) -> Self {
        debug_assert_eq!(data.len(), basis.len() * basis.degree());
        RnsPoly {
            basis: basis.clone(),
            data,
            domain,
        }
    }

    /// Reduces signed coefficients into every limb (coefficient domain).
    pub fn from_signed(basis: &Arc<RnsBasis>, coeffs: &[i64]) -> Result<Self> {
        let n = basis.degree();
        if coeffs.len() != n {
            return invalid_arg(format!("expected {n} coefficients, got {}", coeffs.len()));
        }
        let mut data = Vec::with_capacity(basis.len() * n);
        for m in basis.moduli() {
            data.extend(coeffs.iter().map(|&c| m.reduce_i64(c)));
        }
        Ok(Self::from_data_unchecked(basis, data, Domain::Coefficient))
    }

    /// The same scalar in every coefficient slot of every limb. In the NTT
    /// domain this is the constant polynomial `c`.
    pub fn constant_ntt(basis: &Arc<RnsBasis>, c: u64) -> Self {
        let n = basis.degree();
        let mut data = Vec::with_capacity(basis.len() * n);
        for m in basis.moduli() {
            let r = m.reduce_u64(c);
            data.extend(std::iter::repeat_n(r, n));
        }
        Self::from_data_unchecked(basis, data, Domain::Ntt)
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
    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u32> {
        self.data
    }

    #[inline]
    pub fn limb(&self, i: usize) -> &[u32] {
        let n = self.degree();
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub(crate) fn limb_mut(&mut self, i: usize) -> &mut [u32] {
        let n = self.degree();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub(crate) fn limbs_with_moduli_mut(&mut self) -> impl Iterator<Item = (&Modulus, &mut [u32])> {
        let n = self.basis.degree();
        self.basis.moduli().iter().zip(self.data.chunks_exact_mut(n))
    }

    /// Size of the residue payload in bytes (`k·N·4`).
    #[inline]
    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    fn check_compatible(&self, other: &RnsPoly, what: &str) -> Result<()> {
        if !same_basis(&self.basis, &other.basis) {
            return invalid_arg(format!("{what}: operands use different bases"));
        }
        if self.domain != other.domain {
            return invalid_arg(format!("{what}: operands in different domains"));
        }
        Ok(())
    }

    /// Forward negacyclic NTT of every limb.
    pub fn ntt_forward(&self) -> Result<RnsPoly> {
        let mut out = self.clone();
        out.ntt_forward_inplace()?;
        Ok(out)
    }

    pub fn ntt_forward_inplace(&mut self) -> Result<()> {
        if self.domain != Domain::Coefficient {
            return invalid_state("ntt_forward on a polynomial already in the NTT domain");
        }
        let basis = self.basis.clone();
        for (m, limb) in basis.moduli().iter().zip(self.data.chunks_exact_mut(basis.degree())) {
            m.ntt_forward_inplace(limb);
        }
        self.domain = Domain::Ntt;
        Ok(())
    }

    pub fn ntt_inverse(&self) -> Result<RnsPoly> {
        let mut out = self.clone();
        out.ntt_inverse_inplace()?;
        Ok(out)
    }

    pub fn ntt_inverse_inplace(&mut self) -> Result<()> {
        if self.domain != Domain::Ntt {
            return invalid_state("ntt_inverse on a coefficient-domain polynomial");
        }
        let basis = self.basis.clone();
        for (m, limb) in basis.moduli().iter().zip(self.data.chunks_exact_mut(basis.degree())) {
            m.ntt_inverse_inplace(limb);
        }
        self.domain = Domain::Coefficient;
        Ok(())
    }

    pub fn add(&self, other: &RnsPoly) -> Result<RnsPoly> {
        self.check_compatible(other, "poly_add")?;
        let mut out = self.clone();
        out.add_assign_unchecked(other);
        Ok(out)
    }

    pub fn sub(&self, other: &RnsPoly) -> Result<RnsPoly> {
        self.check_compatible(other, "poly_sub")?;
        let mut out = self.clone();
        out.sub_assign_unchecked(other);
        Ok(out)
    }

    pub fn neg(&self) -> RnsPoly {
        let mut out = self.clone();
        for (m, limb) in out.limbs_with_moduli_mut() {
            for x in limb.iter_mut() {
                *x = m.neg(*x);
            }
        }
        out
    }

    /// Element-wise product; both operands must be in the NTT domain.
    pub fn pointwise_mul(&self, other: &RnsPoly) -> Result<RnsPoly> {
        if self.domain != Domain::Ntt || other.domain != Domain::Ntt {
            return invalid_state("pointwise_mul requires NTT-domain operands");
        }
        if !same_basis(&self.basis, &other.basis) {
            return invalid_arg("pointwise_mul: operands use different bases");
        }
        let mut out = self.clone();
        out.mul_assign_unchecked(other);
        Ok(out)
    }

    /// Multiplies every limb by the residues of `c`.
    pub fn scalar_mul(&self, c: u64) -> RnsPoly {
        let mut out = self.clone();
        for (m, limb) in out.limbs_with_moduli_mut() {
            let s = m.reduce_u64(c);
            let ss = m.shoup(s);
            for x in limb.iter_mut() {
                *x = m.mul_shoup(*x, s, ss);
            }
        }
        out
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &RnsPoly) {
        debug_assert!(same_basis(&self.basis, &other.basis) && self.domain == other.domain);
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, m) in basis.moduli().iter().enumerate() {
            let dst = &mut self.data[i * n..(i + 1) * n];
            for (x, &y) in dst.iter_mut().zip(other.limb(i)) {
                *x = m.add(*x, y);
            }
        }
    }

    pub(crate) fn sub_assign_unchecked(&mut self, other: &RnsPoly) {
        debug_assert!(same_basis(&self.basis, &other.basis) && self.domain == other.domain);
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, m) in basis.moduli().iter().enumerate() {
            let dst = &mut self.data[i * n..(i + 1) * n];
            for (x, &y) in dst.iter_mut().zip(other.limb(i)) {
                *x = m.sub(*x, y);
            }
        }
    }

    pub(crate) fn mul_assign_unchecked(&mut self, other: &RnsPoly) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, m) in basis.moduli().iter().enumerate() {
            let dst = &mut self.data[i * n..(i + 1) * n];
            for (x, &y) in dst.iter_mut().zip(other.limb(i)) {
                *x = m.mul(*x, y);
            }
        }
    }

    /// `self += a ⊙ b` (NTT domain, unchecked).
    pub(crate) fn mul_acc_unchecked(&mut self, a: &RnsPoly, b: &RnsPoly) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, m) in basis.moduli().iter().enumerate() {
            let dst = &mut self.data[i * n..(i + 1) * n];
            for ((x, &u), &v) in dst.iter_mut().zip(a.limb(i)).zip(b.limb(i)) {
                *x = m.add(*x, m.mul(u, v));
            }
        }
    }

    /// Centered CRT reconstruction of every coefficient.
    pub fn crt_reconstruct(&self) -> Result<Vec<BigInt>> {
        Ok(self.crt_centered()?.into_iter().map(BigInt::from).collect())
    }

    /// Fast-path reconstruction into `i128` (valid because `Q < 2^124`).
    pub fn crt_centered(&self) -> Result<Vec<i128>> {
        if self.domain != Domain::Coefficient {
            return invalid_state("crt_reconstruct requires the coefficient domain");
        }
        let mut out = vec![0i128; self.degree()];
        crt_centered_into(self, &mut out);
        Ok(out)
    }
}

pub(crate) fn crt_centered_into(p: &RnsPoly, out: &mut [i128]) {
    let n = p.degree();
    let k = p.limb_count();
    let basis = p.basis();
    let data = p.data();
    for (j, slot) in out.iter_mut().enumerate().take(n) {
        *slot = basis.crt_centered((0..k).map(|i| data[i * n + j]));
    }
}

/// Lifts centered big-integer coefficients into a coefficient-domain polynomial.
pub fn rns_decompose(coeffs: &[BigInt], basis: &Arc<RnsBasis>) -> Result<RnsPoly> {
    let n = basis.degree();
    if coeffs.len() != n {
        return invalid_arg(format!("expected {n} coefficients, got {}", coeffs.len()));
    }
    let mut small = Vec::with_capacity(n);
    for c in coeffs {
        if !basis.in_centered_range(c) {
            return invalid_arg(format!("coefficient {c} outside [-(Q-1)/2, (Q-1)/2]"));
        }
        small.push(i128::try_from(c).expect("centered range fits i128"));
    }
    Ok(rns_decompose_i128(&small, basis))
}

fn rns_decompose_i128(coeffs: &[i128], basis: &Arc<RnsBasis>) -> RnsPoly {
    let n = basis.degree();
    let mut data = Vec::with_capacity(basis.len() * n);
    for m in basis.moduli() {
        data.extend(coeffs.iter().map(|&c| m.reduce_i128(c)));
    }
    RnsPoly::from_data_unchecked(basis, data, Domain::Coefficient)
}

/// `crt_reconstruct` as a free function, mirroring [`rns_decompose`].
pub fn crt_reconstruct(p: &RnsPoly) -> Result<Vec<BigInt>> {
    p.crt_reconstruct()
}

/// Schoolbook product in `Z_q[X]/(X^N + 1)`: terms that wrap past `X^N`
/// come back with a flipped sign.
pub fn negacyclic_convolve_naive(a: &[u32], b: &[u32], q: &Modulus) -> Result<Vec<u32>> {
    let n = a.len();
    if n != b.len() {
        return invalid_arg(format!("length mismatch: {} vs {}", a.len(), b.len()));
    }
    if n == 0 || !n.is_power_of_two() {
        return invalid_arg(format!("length {n} is not a power of two"));
    }
    let qv = q.value() as u64;
    let mut acc = vec![0u64; n];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            let prod = ai as u64 * bj as u64 % qv;
            let k = i + j;
            if k < n {
                acc[k] = (acc[k] + prod) % qv;
            } else {
                acc[k - n] = (acc[k - n] + qv - prod) % qv;
            }
        }
    }
    Ok(acc.into_iter().map(|x| x as u32).collect())
}
