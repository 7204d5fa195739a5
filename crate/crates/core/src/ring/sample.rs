use std::sync::Arc;

use rand::{Rng, RngCore};

use super::basis::RnsBasis;
use super::poly::{Domain, RnsPoly};

/// Independent uniform residues per limb, which is uniform mod `Q` by CRT.
pub fn sample_uniform<R: RngCore + ?Sized>(basis: &Arc<RnsBasis>, domain: Domain, rng: &mut R) -> RnsPoly {
    let n = basis.degree();
    let mut data = Vec::with_capacity(basis.len() * n);
    for m in basis.moduli() {
        let q = m.value();
        data.extend((0..n).map(|_| rng.gen_range(0..q)));
    }
    RnsPoly::from_data_unchecked(basis, data, domain)
}

/// Centered binomial draw in `[-bound, bound]`: the difference of two sums of
/// `bound` fair bits. Variance is `bound / 2`.
pub fn sample_cbd<R: RngCore + ?Sized>(bound: u32, rng: &mut R) -> i64 {
    let mut acc = 0i64;
    let mut left = bound;
    while left > 0 {
        let take = left.min(32);
        let mask = if take == 32 { u32::MAX } else { (1u32 << take) - 1 };
        let x = rng.next_u32() & mask;
        let y = rng.next_u32() & mask;
        acc += x.count_ones() as i64 - y.count_ones() as i64;
        left -= take;
    }
    acc
}

/// Error polynomial with centered-binomial coefficients, coefficient domain.
pub fn sample_error<R: RngCore + ?Sized>(basis: &Arc<RnsBasis>, bound: u32, rng: &mut R) -> RnsPoly {
    let coeffs: Vec<i64> = (0..basis.degree()).map(|_| sample_cbd(bound, rng)).collect();
    RnsPoly::from_signed(basis, &coeffs).expect("length matches degree")
}

/// Uniform ternary coefficients in `{-1, 0, 1}`, coefficient domain.
pub fn sample_ternary<R: RngCore + ?Sized>(basis: &Arc<RnsBasis>, rng: &mut R) -> RnsPoly {
    let coeffs: Vec<i64> = (0..basis.degree()).map(|_| rng.gen_range(-1i64..=1)).collect();
    RnsPoly::from_signed(basis, &coeffs).expect("length matches degree")
}
