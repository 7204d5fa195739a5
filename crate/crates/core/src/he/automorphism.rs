use crate::error::{invalid_arg, Result};
use crate::ring::{bit_reverse, Domain, RnsPoly};

fn check_index(n: usize, k: usize) -> Result<usize> {
    let two_n = 2 * n;
    let k = k % two_n;
    if k.is_multiple_of(2) {
        return invalid_arg(format!("automorphism index {k} must be odd"));
    }
    Ok(k)
}

/// Slot permutation realising `X -> X^k` in the bit-reversed NTT order:
/// `out[j] = in[perm[j]]`.
pub fn ntt_permutation(n: usize, k: usize) -> Result<Vec<usize>> {
    let k = check_index(n, k)?;
    let log_n = n.trailing_zeros();
    let two_n = 2 * n;
    Ok((0..n)
        .map(|j| {
            // slot j evaluates at psi^(2 brv(j) + 1)
            let e = 2 * bit_reverse(j, log_n) + 1;
            let target = e * k % two_n;
            bit_reverse((target - 1) / 2, log_n)
        })
        .collect())
}

/// Applies `sigma_k: p(X) -> p(X^k)` in either domain.
pub fn automorphism(p: &RnsPoly, k: usize) -> Result<RnsPoly> {
    let n = p.degree();
    match p.domain() {
        Domain::Ntt => {
            let perm = ntt_permutation(n, k)?;
            Ok(apply_ntt_permutation(p, &perm))
        }
        Domain::Coefficient => {
            let k = check_index(n, k)?;
            let two_n = 2 * n;
            let mut out = RnsPoly::zero(p.basis(), Domain::Coefficient);
            let basis = p.basis().clone();
            for (li, m) in basis.moduli().iter().enumerate() {
                let src = p.limb(li);
                let dst = out.limb_mut(li);
                for (i, &c) in src.iter().enumerate() {
                    let t = i * k % two_n;
                    if t < n {
                        dst[t] = c;
                    } else {
                        dst[t - n] = m.neg(c);
                    }
                }
            }
            Ok(out)
        }
    }
}

pub(crate) fn apply_ntt_permutation(p: &RnsPoly, perm: &[usize]) -> RnsPoly {
    let n = p.degree();
    let mut out = RnsPoly::zero(p.basis(), Domain::Ntt);
    for li in 0..p.limb_count() {
        let src = p.limb(li);
        let dst = out.limb_mut(li);
        for (d, &s) in dst.iter_mut().zip(perm) {
            *d = src[s];
        }
    }
    debug_assert_eq!(perm.len(), n);
    out
}

/// Multiplies a coefficient- or NTT-domain polynomial by the monomial
/// `X^e` for any integer `e` (negacyclic: `X^N = -1`).
pub fn monomial_mul(p: &RnsPoly, e: i64) -> Result<RnsPoly> {
    let n = p.degree();
    let two_n = 2 * n as i64;
    let e = e.rem_euclid(two_n) as usize;
    match p.domain() {
        Domain::Coefficient => {
            let mut out = RnsPoly::zero(p.basis(), Domain::Coefficient);
            let basis = p.basis().clone();
            for (li, m) in basis.moduli().iter().enumerate() {
                let src = p.limb(li);
                let dst = out.limb_mut(li);
                for (i, &c) in src.iter().enumerate() {
                    let t = (i + e) % (2 * n);
                    if t < n {
                        dst[t] = c;
                    } else {
                        dst[t - n] = m.neg(c);
                    }
                }
            }
            Ok(out)
        }
        Domain::Ntt => {
            let mono = monomial_ntt(p.basis(), e)?;
            p.pointwise_mul(&mono)
        }
    }
}

/// NTT-domain image of `X^e`, `0 <= e < 2N`.
pub fn monomial_ntt(basis: &std::sync::Arc<crate::ring::RnsBasis>, e: usize) -> Result<RnsPoly> {
    let n = basis.degree();
    let mut coeffs = vec![0i64; n];
    if e < n {
        coeffs[e] = 1;
    } else {
        coeffs[e - n] = -1;
    }
    RnsPoly::from_signed(basis, &coeffs)?.ntt_forward()
}
